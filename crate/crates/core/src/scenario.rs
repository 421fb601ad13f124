//! Scenario geometry, path loss and seeded channel generation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::rng::{Sampler, STREAM_CHANNELS};
use crate::socp::CcpParams;

pub type Point = [f64; 3];

/// How user positions are chosen for a realization.
#[derive(Debug, Clone, PartialEq)]
pub enum UserPlacement {
    /// Uniform drop in an axis-aligned square of side `side` centred at `center`
    /// (the height is taken from `center`).
    Square { center: Point, side: f64 },
    /// Fixed positions, one per user.
    Fixed(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub bs: Point,
    pub ris: Point,
    pub users: UserPlacement,
    pub eve: Point,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            bs: [0.0, 0.0, 30.0],
            ris: [50.0, 0.0, 10.0],
            users: UserPlacement::Square {
                center: [300.0, 10.0, 1.5],
                side: 10.0,
            },
            eve: [300.0, 10.0, 1.5],
        }
    }
}

/// Path-loss exponents per link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossExponents {
    pub bs_ris: f64,
    pub ris_user: f64,
    pub ris_eve: f64,
    pub bs_user: f64,
    pub bs_eve: f64,
}

impl Default for PathLossExponents {
    fn default() -> Self {
        Self {
            bs_ris: 2.0,
            ris_user: 2.0,
            ris_eve: 2.0,
            bs_user: 4.0,
            bs_eve: 4.0,
        }
    }
}

/// Statistics of the RIS phase error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseNoise {
    /// Phase errors uniform on `[-pi/2, pi/2]`.
    Uniform,
    /// Ideal RIS with no phase error.
    Absent,
}

/// Parameters of the smoothed-min MM algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmParams {
    pub zeta_init: f64,
    /// Exponent applied to the smoothing parameter after every iteration.
    pub zeta_growth: f64,
    pub zeta_max: f64,
    /// Relative-change stopping tolerance.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for MmParams {
    fn default() -> Self {
        Self {
            zeta_init: 1.25,
            zeta_growth: 1.02,
            zeta_max: 500.0,
            tolerance: 1e-5,
            max_iter: 200,
        }
    }
}

/// Complete description of one system instance and its algorithm settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub m_ris: usize,
    pub k_users: usize,
    /// Transmit power budget in watts.
    pub p_max: f64,
    pub kappa_t: f64,
    /// Receive distortion ratio, shared by all users.
    pub kappa_r: f64,
    pub noise_user: f64,
    pub noise_eve: f64,
    pub weights: Vec<f64>,
    pub geometry: Geometry,
    pub rician_k: f64,
    pub pathloss: PathLossExponents,
    pub phase_noise: PhaseNoise,
    pub mm: MmParams,
    pub ccp: CcpParams,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let noise = noise_power_watts(-174.0, 10e6);
        Self {
            n_tx: 4,
            m_ris: 16,
            k_users: 3,
            p_max: 1.0,
            kappa_t: 0.01,
            kappa_r: 0.01,
            noise_user: noise,
            noise_eve: noise,
            weights: vec![1.0; 3],
            geometry: Geometry::default(),
            rician_k: 10.0,
            pathloss: PathLossExponents::default(),
            phase_noise: PhaseNoise::Uniform,
            mm: MmParams::default(),
            ccp: CcpParams::default(),
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.to_string()));
        if self.n_tx == 0 {
            return bad("n_tx must be at least 1");
        }
        if self.k_users == 0 {
            return bad("k_users must be at least 1");
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return bad("p_max must be positive");
        }
        if !(self.noise_user > 0.0 && self.noise_eve > 0.0) {
            return bad("noise powers must be positive");
        }
        if !(self.kappa_t >= 0.0 && self.kappa_r >= 0.0) {
            return bad("distortion ratios must be nonnegative");
        }
        if self.weights.len() != self.k_users {
            return Err(Error::Parameter(format!(
                "expected {} weights, got {}",
                self.k_users,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return bad("weights must be positive");
        }
        if !(self.rician_k >= 0.0) {
            return bad("rician_k must be nonnegative");
        }
        if let UserPlacement::Fixed(p) = &self.geometry.users {
            if p.len() != self.k_users {
                return bad("fixed user positions must match k_users");
            }
        }
        let mm = &self.mm;
        if !(mm.zeta_init > 0.0 && mm.zeta_growth >= 1.0 && mm.zeta_max >= mm.zeta_init) {
            return bad("smoothing schedule must satisfy zeta_init > 0, growth >= 1, zeta_max >= zeta_init");
        }
        if !(mm.tolerance > 0.0) || mm.max_iter == 0 {
            return bad("tolerance must be positive and max_iter at least 1");
        }
        self.ccp.validate()
    }

    /// Transmit power in dBm.
    pub fn p_dbm(&self) -> f64 {
        10.0 * (self.p_max * 1e3).log10()
    }

    /// Copy with the RIS removed.
    pub fn without_ris(&self) -> Self {
        Self {
            m_ris: 0,
            ..self.clone()
        }
    }

    /// Copy with ideal hardware (no distortion, no phase error).
    pub fn ideal_hardware(&self) -> Self {
        Self {
            kappa_t: 0.0,
            kappa_r: 0.0,
            phase_noise: PhaseNoise::Absent,
            ..self.clone()
        }
    }
}

/// Convert dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Thermal noise power in watts for a density in dBm/Hz over a bandwidth.
pub fn noise_power_watts(density_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(density_dbm_hz + 10.0 * bandwidth_hz.log10())
}

/// One realization of all physical channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS to user `k`, length N.
    pub h_bu: Vec<CVec>,
    /// BS to eavesdropper, length N.
    pub h_be: CVec,
    /// BS to RIS, M x N.
    pub h_br: CMat,
    /// RIS to user `k`, length M.
    pub h_ru: Vec<CVec>,
    /// RIS to eavesdropper, length M.
    pub h_re: CVec,
    /// User positions used for this realization.
    pub user_positions: Vec<Point>,
}

impl ChannelSet {
    pub fn n_tx(&self) -> usize {
        self.h_be.len()
    }

    pub fn m_ris(&self) -> usize {
        self.h_re.len()
    }

    pub fn k_users(&self) -> usize {
        self.h_bu.len()
    }

    /// Same direct links with all RIS links removed.
    pub fn without_ris(&self) -> Self {
        let n = self.n_tx();
        Self {
            h_bu: self.h_bu.clone(),
            h_be: self.h_be.clone(),
            h_br: CMat::zeros(0, n),
            h_ru: vec![CVec::zeros(0); self.k_users()],
            h_re: CVec::zeros(0),
            user_positions: self.user_positions.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        let fin = |v: &[C64]| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        self.h_bu.iter().all(|h| fin(h.as_slice()))
            && fin(self.h_be.as_slice())
            && fin(self.h_br.as_slice())
            && self.h_ru.iter().all(|h| fin(h.as_slice()))
            && fin(self.h_re.as_slice())
    }
}

/// Large-scale attenuation `-30 - 10 alpha log10(d)` in dB (1 m reference).
pub fn path_loss_db(distance: f64, alpha: f64) -> Result<f64> {
    if !(distance >= 1.0) {
        return Err(Error::Domain(format!(
            "distance {distance} m is below the 1 m reference distance"
        )));
    }
    Ok(-30.0 - 10.0 * alpha * distance.log10())
}

fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn steering(n: usize, azimuth: f64) -> CVec {
    let s = azimuth.sin();
    CVec::from_fn(n, |i, _| C64::from_polar(1.0, PI * i as f64 * s))
}

/// Line-of-sight matrix `a_rx a_tx^H` (n_rx x n_tx) between two half-wavelength ULAs.
///
/// Each array's angle is the azimuth `atan2(dy, dx)` of the direction pointing
/// to the other endpoint.
pub fn los_component(tx: &Point, rx: &Point, n_rx: usize, n_tx: usize) -> Result<CMat> {
    if distance(tx, rx) == 0.0 {
        return Err(Error::Geometry(format!("coincident endpoints at {tx:?}")));
    }
    let az_tx = (rx[1] - tx[1]).atan2(rx[0] - tx[0]);
    let az_rx = (tx[1] - rx[1]).atan2(tx[0] - rx[0]);
    let a_rx = steering(n_rx, az_rx);
    let a_tx = steering(n_tx, az_tx);
    Ok(&a_rx * a_tx.adjoint())
}

fn amplitude(tx: &Point, rx: &Point, alpha: f64) -> Result<f64> {
    let pl = path_loss_db(distance(tx, rx), alpha)?;
    Ok(10f64.powf(pl / 20.0))
}

fn rician(
    sampler: &mut Sampler,
    tx: &Point,
    rx: &Point,
    n_rx: usize,
    n_tx: usize,
    alpha: f64,
    kappa: f64,
) -> Result<CMat> {
    let los = los_component(tx, rx, n_rx, n_tx)?;
    let amp = amplitude(tx, rx, alpha)?;
    let (w_los, w_nlos) = if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
    };
    let mut h = CMat::zeros(n_rx, n_tx);
    for i in 0..n_rx {
        for j in 0..n_tx {
            let nlos = sampler.complex_normal(1.0);
            h[(i, j)] = (los[(i, j)] * w_los + nlos * w_nlos) * amp;
        }
    }
    Ok(h)
}

fn rayleigh(sampler: &mut Sampler, tx: &Point, rx: &Point, n: usize, alpha: f64) -> Result<CVec> {
    let var = amplitude(tx, rx, alpha)?.powi(2);
    Ok(CVec::from_fn(n, |_, _| sampler.complex_normal(var)))
}

/// Draw user positions for a seed (uses the channel stream prefix).
fn user_positions(config: &SystemConfig, sampler: &mut Sampler) -> Vec<Point> {
    match &config.geometry.users {
        UserPlacement::Fixed(p) => p.clone(),
        UserPlacement::Square { center, side } => (0..config.k_users)
            .map(|_| {
                let x = center[0] + side * (sampler.uniform() - 0.5);
                let y = center[1] + side * (sampler.uniform() - 0.5);
                [x, y, center[2]]
            })
            .collect(),
    }
}

/// Generate one channel realization.
///
/// Draw order on the channel stream: user positions (x then y per user), each
/// BS-user vector, the BS-eavesdropper vector, the BS-RIS small-scale matrix row
/// by row, each RIS-user vector, the RIS-eavesdropper vector. Direct links thus
/// do not depend on the RIS size.
pub fn generate_channels(config: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    let mut s = Sampler::new(seed, STREAM_CHANNELS);
    let (n, m) = (config.n_tx, config.m_ris);
    let g = &config.geometry;
    let pl = &config.pathloss;
    let kappa = config.rician_k;
    let users = user_positions(config, &mut s);
    let mut h_bu = Vec::with_capacity(users.len());
    for u in &users {
        h_bu.push(rayleigh(&mut s, &g.bs, u, n, pl.bs_user)?);
    }
    let h_be = rayleigh(&mut s, &g.bs, &g.eve, n, pl.bs_eve)?;

    // RIS rows are taken as the conjugate of the LoS row so that h^H diag(phi) H applies.
    let h_br = rician(&mut s, &g.bs, &g.ris, m, n, pl.bs_ris, kappa)?;
    let mut h_ru = Vec::with_capacity(users.len());
    for u in &users {
        let row = rician(&mut s, &g.ris, u, 1, m, pl.ris_user, kappa)?;
        h_ru.push(row.adjoint().column(0).into_owned());
    }
    let h_re = rician(&mut s, &g.ris, &g.eve, 1, m, pl.ris_eve, kappa)?
        .adjoint()
        .column(0)
        .into_owned();
    Ok(ChannelSet {
        h_bu,
        h_be,
        h_br,
        h_ru,
        h_re,
        user_positions: users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_loss_values() {
        assert_eq!(path_loss_db(1.0, 2.0).unwrap(), -30.0);
        assert!((path_loss_db(100.0, 2.0).unwrap() + 70.0).abs() < 1e-12);
        // -30 - 40*log10(300) = -30 - 40*2.4771212547196626
        assert!((path_loss_db(300.0, 4.0).unwrap() + 129.084_850_188_786_5).abs() < 1e-9);
        assert!(path_loss_db(0.5, 2.0).is_err());
    }

    #[test]
    fn path_loss_monotone() {
        let mut prev = path_loss_db(1.5, 2.0).unwrap();
        for d in [2.0, 10.0, 100.0, 1000.0] {
            let v = path_loss_db(d, 2.0).unwrap();
            assert!(v < prev);
            assert!(path_loss_db(d, 3.0).unwrap() < v);
            prev = v;
        }
    }

    #[test]
    fn noise_power_default() {
        let w = noise_power_watts(-174.0, 10e6);
        assert!((w - 3.981_071_705_534_97e-14).abs() < 1e-24);
    }

    #[test]
    fn los_properties() {
        let one = los_component(&[0.0, 0.0, 0.0], &[3.0, 4.0, 0.0], 1, 1).unwrap();
        assert!((one[(0, 0)].norm() - 1.0).abs() < 1e-15);
        let l = los_component(&[0.0, 0.0, 30.0], &[250.0, 17.0, 1.5], 6, 4).unwrap();
        assert!(l.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert!((l.norm() - (24f64).sqrt()).abs() < 1e-12);
        let sv = l.singular_values();
        assert!(sv[1] < 1e-10 * sv[0]);
        let bore = los_component(&[0.0, 0.0, 30.0], &[50.0, 0.0, 10.0], 5, 3).unwrap();
        assert!(bore.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-12));
        assert!(los_component(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 2, 2).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_sized() {
        let cfg = SystemConfig::default();
        let a = generate_channels(&cfg, 42).unwrap();
        let b = generate_channels(&cfg, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.h_br.shape(), (16, 4));
        assert_eq!(a.h_ru.len(), 3);
        assert!(a.is_finite());
        let c = generate_channels(&cfg, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn large_rician_factor_gives_los() {
        let mut cfg = SystemConfig::default();
        cfg.rician_k = 1e12;
        let ch = generate_channels(&cfg, 1).unwrap();
        let g = &cfg.geometry;
        let los = los_component(&g.bs, &g.ris, 16, 4).unwrap();
        let amp = 10f64.powf(path_loss_db(distance(&g.bs, &g.ris), 2.0).unwrap() / 20.0);
        let expect = los * C64::new(amp, 0.0);
        assert!((&ch.h_br - &expect).norm() <= 1e-5 * expect.norm());
    }

    #[test]
    fn no_ris_gives_empty_links() {
        let cfg = SystemConfig::default().without_ris();
        let ch = generate_channels(&cfg, 3).unwrap();
        assert_eq!(ch.m_ris(), 0);
        assert_eq!(ch.h_br.shape(), (0, 4));
    }
}
