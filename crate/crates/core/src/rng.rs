//! Seeded random streams.
//!
//! Every draw comes from ChaCha20 keyed with the 64-bit seed (little-endian in
//! the first eight key bytes, remaining 24 bytes zero) and a stream id naming
//! the purpose. Uniforms are `(next_u64 >> 11) * 2^-53`; standard normals use
//! Box-Muller on two consecutive uniforms `u1, u2` with `r = sqrt(-2 ln(1 - u1))`,
//! returning `r cos(2 pi u2)` first and `r sin(2 pi u2)` second.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::linalg::C64;

/// Stream used for channel realizations and user drops.
pub const STREAM_CHANNELS: u64 = 0;
/// Stream used for the initial reflection phases.
pub const STREAM_INIT: u64 = 1;
/// Stream used for power-iteration start vectors.
pub const STREAM_POWER: u64 = 2;

pub fn stream(seed: u64, stream_id: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stream_id);
    rng
}

/// Deterministic sampler on top of a ChaCha20 stream.
pub struct Sampler {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl Sampler {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self {
            rng: stream(seed, stream_id),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * t.sin());
        r * t.cos()
    }

    /// Circularly-symmetric complex Gaussian with variance `var`.
    pub fn complex_normal(&mut self, var: f64) -> C64 {
        let s = (var / 2.0).sqrt();
        let re = self.normal();
        let im = self.normal();
        C64::new(s * re, s * im)
    }

    /// Unit-modulus sample with phase uniform on `[0, 2 pi)`.
    pub fn unit_phase(&mut self) -> C64 {
        C64::from_polar(1.0, 2.0 * std::f64::consts::PI * self.uniform())
    }
}
