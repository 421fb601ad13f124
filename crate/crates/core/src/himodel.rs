//! RIS phase-error statistics and effective-channel assembly.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, RMat, RVec};
use crate::scenario::{ChannelSet, PhaseNoise};

/// Tolerance on `|phi_m| = 1`.
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

/// Which receiver a channel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    User(usize),
    Eve,
}

impl PhaseNoise {
    /// Mean of `exp(-j theta)` for one element.
    pub fn first_moment(self) -> f64 {
        match self {
            PhaseNoise::Uniform => 2.0 / PI,
            PhaseNoise::Absent => 1.0,
        }
    }

    /// Standard deviation factor of the phase-error fluctuation, `sqrt(1 - mean^2)`.
    pub fn spread(self) -> f64 {
        match self {
            PhaseNoise::Uniform => (1.0 - 4.0 / (PI * PI)).sqrt(),
            PhaseNoise::Absent => 0.0,
        }
    }
}

/// `E{psi^* psi^T}` for M elements: unit diagonal, `4/pi^2` off the diagonal.
pub fn phase_noise_second_moment(m_ris: usize) -> RMat {
    let off = 4.0 / (PI * PI);
    RMat::from_fn(m_ris, m_ris, |i, j| if i == j { 1.0 } else { off })
}

/// `E{psi^*}` for M elements.
pub fn phase_noise_first_moment(m_ris: usize) -> RVec {
    RVec::from_element(m_ris, 2.0 / PI)
}

/// Stacked effective channel `[h_hat, H_hat]` whose Gram matrix is the
/// phase-error-averaged channel covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub h_hat: CVec,
    pub h_mat: CMat,
    pub stacked: CMat,
}

impl EffectiveChannel {
    /// `stacked * stacked^H`.
    pub fn gram(&self) -> CMat {
        &self.stacked * self.stacked.adjoint()
    }

    pub fn n_tx(&self) -> usize {
        self.stacked.nrows()
    }
}

pub fn check_unit_modulus(phi: &CVec) -> Result<()> {
    for (m, z) in phi.iter().enumerate() {
        if (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL {
            return Err(Error::Precondition(format!(
                "reflection coefficient {m} has modulus {}",
                z.norm()
            )));
        }
    }
    Ok(())
}

/// RIS link vector and direct link for a target.
pub fn link_of(channels: &ChannelSet, target: Target) -> (&CVec, &CVec) {
    match target {
        Target::User(k) => (&channels.h_ru[k], &channels.h_bu[k]),
        Target::Eve => (&channels.h_re, &channels.h_be),
    }
}

/// Assemble the effective channel of one link without checking `phi`.
///
/// Column 0 is `mean * H_br^H diag(phi^*) h_r + h_b`; column `m + 1` is
/// `spread * conj(phi_m) h_r[m] H_br[m, :]^H`. The fluctuation block is omitted
/// when the spread is zero.
pub fn assemble(phi: &CVec, h_r: &CVec, h_b: &CVec, h_br: &CMat, noise: PhaseNoise) -> EffectiveChannel {
    let n = h_b.len();
    let m = phi.len();
    let mean = noise.first_moment();
    let spread = noise.spread();
    let mut h_hat = h_b.clone();
    let cols = if spread > 0.0 { m } else { 0 };
    let mut h_mat = CMat::zeros(n, cols);
    for i in 0..m {
        let coef = phi[i].conj() * h_r[i];
        for j in 0..n {
            let g = coef * h_br[(i, j)].conj();
            h_hat[j] += g * mean;
            if cols > 0 {
                h_mat[(j, i)] = g * spread;
            }
        }
    }
    let mut stacked = CMat::zeros(n, cols + 1);
    stacked.set_column(0, &h_hat);
    if cols > 0 {
        stacked.columns_mut(1, cols).copy_from(&h_mat);
    }
    EffectiveChannel {
        h_hat,
        h_mat,
        stacked,
    }
}

/// Effective channel under the RIS phase-error model.
pub fn effective_channel(phi: &CVec, channels: &ChannelSet, target: Target) -> Result<EffectiveChannel> {
    effective_channel_for(phi, channels, target, PhaseNoise::Uniform)
}

/// Effective channel for an explicit phase-error model.
pub fn effective_channel_for(
    phi: &CVec,
    channels: &ChannelSet,
    target: Target,
    noise: PhaseNoise,
) -> Result<EffectiveChannel> {
    check_unit_modulus(phi)?;
    check_dims(phi, channels, target)?;
    let (h_r, h_b) = link_of(channels, target);
    Ok(assemble(phi, h_r, h_b, &channels.h_br, noise))
}

/// Cascaded channel `h_r^H diag(phi) H_br + h_b^H`, returned as a column (its conjugate transpose).
pub fn ideal_effective_channel(phi: &CVec, channels: &ChannelSet, target: Target) -> Result<CVec> {
    Ok(effective_channel_for(phi, channels, target, PhaseNoise::Absent)?.h_hat)
}

fn check_dims(phi: &CVec, channels: &ChannelSet, target: Target) -> Result<()> {
    let (h_r, _) = match target {
        Target::User(k) if k >= channels.k_users() => {
            return Err(Error::Precondition(format!("user index {k} out of range")))
        }
        t => link_of(channels, t),
    };
    if phi.len() != h_r.len() || channels.h_br.nrows() != phi.len() {
        return Err(Error::Precondition(format!(
            "reflection vector has length {}, RIS has {} elements",
            phi.len(),
            h_r.len()
        )));
    }
    Ok(())
}

/// Effective channels of every user and the eavesdropper for one `phi`.
#[derive(Debug, Clone)]
pub struct EffectiveLinks {
    pub users: Vec<EffectiveChannel>,
    pub eve: EffectiveChannel,
}

impl EffectiveLinks {
    pub fn new(phi: &CVec, channels: &ChannelSet, noise: PhaseNoise) -> Result<Self> {
        check_unit_modulus(phi)?;
        let users = (0..channels.k_users())
            .map(|k| effective_channel_for(phi, channels, Target::User(k), noise))
            .collect::<Result<Vec<_>>>()?;
        let eve = effective_channel_for(phi, channels, Target::Eve, noise)?;
        Ok(Self { users, eve })
    }

    /// Assemble without the unit-modulus check (used for relaxed iterates).
    pub fn assemble_unchecked(phi: &CVec, channels: &ChannelSet, noise: PhaseNoise) -> Self {
        let users = (0..channels.k_users())
            .map(|k| assemble(phi, &channels.h_ru[k], &channels.h_bu[k], &channels.h_br, noise))
            .collect();
        let eve = assemble(phi, &channels.h_re, &channels.h_be, &channels.h_br, noise);
        Self { users, eve }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::scenario::{generate_channels, SystemConfig};

    fn scalar_channels(v: f64) -> ChannelSet {
        let one = CVec::from_element(1, C64::new(v, 0.0));
        ChannelSet {
            h_bu: vec![one.clone()],
            h_be: one.clone(),
            h_br: CMat::from_element(1, 1, C64::new(v, 0.0)),
            h_ru: vec![one.clone()],
            h_re: one,
            user_positions: vec![[0.0; 3]],
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn moments() {
        assert_eq!(phase_noise_second_moment(1), RMat::from_element(1, 1, 1.0));
        let g = phase_noise_second_moment(2);
        assert!((g[(0, 1)] - 0.405_284_734_569_351).abs() < 1e-12);
        assert_eq!(g[(1, 1)], 1.0);
        let f = phase_noise_first_moment(3);
        assert!(f.iter().all(|v| (v - 0.636_619_772_367_581).abs() < 1e-12));
        assert_eq!(phase_noise_second_moment(0).nrows(), 0);
    }

    #[test]
    fn second_moment_is_psd() {
        let e = phase_noise_second_moment(8).symmetric_eigen();
        assert!(e.eigenvalues.min() > 0.0);
    }

    #[test]
    fn scalar_effective_channel() {
        let ch = scalar_channels(1.0);
        let phi = CVec::from_element(1, C64::new(1.0, 0.0));
        let e = effective_channel(&phi, &ch, Target::User(0)).unwrap();
        assert!((e.h_hat[0] - C64::new(2.0 / PI + 1.0, 0.0)).norm() < 1e-15);
        assert!((e.h_mat[(0, 0)] - C64::new((1.0 - 4.0 / (PI * PI)).sqrt(), 0.0)).norm() < 1e-15);
        let ideal = ideal_effective_channel(&phi, &ch, Target::User(0)).unwrap();
        assert!((ideal[0] - C64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_ris_path_leaves_direct_link() {
        let cfg = SystemConfig::default();
        let mut ch = generate_channels(&cfg, 9).unwrap();
        ch.h_br.fill(C64::new(0.0, 0.0));
        let phi = CVec::from_element(16, C64::new(0.0, 1.0));
        let e = effective_channel(&phi, &ch, Target::Eve).unwrap();
        assert_eq!(e.h_hat, ch.h_be);
        assert!(e.h_mat.iter().all(|z| z.norm() == 0.0));
        assert_eq!(ideal_effective_channel(&phi, &ch, Target::Eve).unwrap(), ch.h_be);
    }

    #[test]
    fn rejects_non_unit_phi() {
        let ch = scalar_channels(1.0);
        let phi = CVec::from_element(1, C64::new(0.5, 0.0));
        assert!(matches!(
            effective_channel(&phi, &ch, Target::User(0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn ideal_matches_mean_column_with_unit_mean() {
        let cfg = SystemConfig::default();
        let ch = generate_channels(&cfg, 10).unwrap();
        let phi = CVec::from_fn(16, |i, _| C64::from_polar(1.0, 0.3 * i as f64));
        let ideal = ideal_effective_channel(&phi, &ch, Target::User(1)).unwrap();
        let direct = &ch.h_br.adjoint() * CVec::from_fn(16, |i, _| phi[i].conj() * ch.h_ru[1][i]) + &ch.h_bu[1];
        assert!((ideal - direct).norm() < 1e-20);
    }

    #[test]
    fn global_phase_rotation_keeps_ris_gram() {
        let cfg = SystemConfig::default();
        let mut ch = generate_channels(&cfg, 12).unwrap();
        ch.h_bu[0].fill(C64::new(0.0, 0.0));
        let phi = CVec::from_fn(16, |i, _| C64::from_polar(1.0, 0.7 * i as f64));
        let rot = &phi * C64::from_polar(1.0, 1.1);
        let a = effective_channel(&phi, &ch, Target::User(0)).unwrap().gram();
        let b = effective_channel(&rot, &ch, Target::User(0)).unwrap().gram();
        assert!((&a - &b).norm() <= 1e-10 * a.norm());
    }
}
