//! SINRs, achievable and secrecy rates, and the weighted minimum secrecy rate.

use crate::error::{Error, Result};
use crate::himodel::{check_unit_modulus, EffectiveChannel, EffectiveLinks};
use crate::linalg::{unvec_columns, vec_columns, CMat, CVec, RVec, C64};
use crate::scenario::{ChannelSet, SystemConfig};

/// Precoder and reflection vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamState {
    w_mat: CMat,
    w_vec: CVec,
    phi: CVec,
}

impl BeamState {
    pub fn new(w_mat: CMat, phi: CVec) -> Self {
        let w_vec = vec_columns(&w_mat);
        Self { w_mat, w_vec, phi }
    }

    /// Build from the column-stacked precoder.
    pub fn from_vec(w_vec: CVec, n_tx: usize, k_users: usize, phi: CVec) -> Result<Self> {
        if w_vec.len() != n_tx * k_users {
            return Err(Error::Precondition(format!(
                "precoder vector has length {}, expected {}",
                w_vec.len(),
                n_tx * k_users
            )));
        }
        let w_mat = unvec_columns(&w_vec, n_tx, k_users);
        Ok(Self { w_mat, w_vec, phi })
    }

    pub fn w_mat(&self) -> &CMat {
        &self.w_mat
    }

    pub fn w_vec(&self) -> &CVec {
        &self.w_vec
    }

    pub fn phi(&self) -> &CVec {
        &self.phi
    }

    pub fn with_w_vec(&self, w_vec: CVec) -> Self {
        let w_mat = unvec_columns(&w_vec, self.w_mat.nrows(), self.w_mat.ncols());
        Self {
            w_mat,
            w_vec,
            phi: self.phi.clone(),
        }
    }

    pub fn with_phi(&self, phi: CVec) -> Self {
        Self {
            phi,
            ..self.clone()
        }
    }

    /// `Tr(W^H W)`.
    pub fn power(&self) -> f64 {
        self.w_vec.norm_squared()
    }

    /// Check the power budget and unit modulus.
    pub fn validate(&self, p_max: f64) -> Result<()> {
        if self.power() > p_max + 1e-9 {
            return Err(Error::Precondition(format!(
                "precoder power {} exceeds budget {p_max}",
                self.power()
            )));
        }
        check_unit_modulus(&self.phi)
    }
}

/// `diag(W W^H)` as a real vector.
pub fn transmit_diag(w_mat: &CMat) -> RVec {
    RVec::from_fn(w_mat.nrows(), |n, _| w_mat.row(n).iter().map(|z| z.norm_sqr()).sum())
}

/// Transmit distortion covariance `kappa_t diag(W W^H)`.
pub fn distortion_covariance(w_mat: &CMat, kappa_t: f64) -> CMat {
    let d = transmit_diag(w_mat);
    let n = d.len();
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(kappa_t * d[i], 0.0);
    }
    m
}

/// Per-link power terms shared by the SINR expressions.
#[derive(Debug, Clone)]
pub struct LinkTerms {
    /// `||H^H w_i||^2` for every stream `i`.
    pub stream_power: Vec<f64>,
    /// `Tr[Upsilon_t H H^H]`.
    pub distortion: f64,
}

impl LinkTerms {
    pub fn new(eff: &EffectiveChannel, w_mat: &CMat, kappa_t: f64) -> Self {
        let a = eff.stacked.adjoint() * w_mat;
        let stream_power = (0..w_mat.ncols()).map(|i| a.column(i).norm_squared()).collect();
        let t = transmit_diag(w_mat);
        let distortion = kappa_t
            * (0..eff.stacked.nrows())
                .map(|n| t[n] * eff.stacked.row(n).norm_squared())
                .sum::<f64>();
        Self {
            stream_power,
            distortion,
        }
    }

    /// `Tr[(W W^H + kappa_t diag(W W^H)) H H^H]`.
    pub fn total(&self) -> f64 {
        self.stream_power.iter().sum::<f64>() + self.distortion
    }
}

/// Receive distortion power `kappa_r Tr[(W W^H + kappa_t diag(W W^H)) H H^H]`.
pub fn receiver_distortion(w_mat: &CMat, eff: &EffectiveChannel, kappa_t: f64, kappa_r: f64) -> f64 {
    kappa_r * LinkTerms::new(eff, w_mat, kappa_t).total()
}

fn sinr_from_terms(t: &LinkTerms, k: usize, kappa_r: f64, noise: f64) -> f64 {
    let signal = t.stream_power[k];
    let interference: f64 = t.stream_power.iter().sum::<f64>() - signal;
    let denom = interference.max(0.0) + t.distortion + kappa_r * t.total() + noise;
    signal / denom
}

/// Legitimate-user SINR of stream `k` for a given effective channel.
pub fn user_sinr_on(eff: &EffectiveChannel, w_mat: &CMat, k: usize, config: &SystemConfig) -> f64 {
    let t = LinkTerms::new(eff, w_mat, config.kappa_t);
    sinr_from_terms(&t, k, config.kappa_r, config.noise_user)
}

/// Eavesdropper SINR for stream `k` (interference cancelled, distortion kept).
pub fn eve_sinr_on(eff: &EffectiveChannel, w_mat: &CMat, k: usize, config: &SystemConfig) -> f64 {
    let t = LinkTerms::new(eff, w_mat, config.kappa_t);
    t.stream_power[k] / (t.distortion + config.noise_eve)
}

/// Rates of every user for one state.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub user_rate: Vec<f64>,
    pub eve_rate: Vec<f64>,
}

impl RateReport {
    pub fn from_links(links: &EffectiveLinks, w_mat: &CMat, config: &SystemConfig) -> Self {
        let eve_terms = LinkTerms::new(&links.eve, w_mat, config.kappa_t);
        let k_users = w_mat.ncols();
        let user_rate = (0..k_users)
            .map(|k| {
                let t = LinkTerms::new(&links.users[k], w_mat, config.kappa_t);
                sinr_from_terms(&t, k, config.kappa_r, config.noise_user).ln_1p()
            })
            .collect();
        let eve_rate = (0..k_users)
            .map(|k| (eve_terms.stream_power[k] / (eve_terms.distortion + config.noise_eve)).ln_1p())
            .collect();
        Self { user_rate, eve_rate }
    }

    /// `R_U,k - R_E,k` without the clamp.
    pub fn unclamped(&self, k: usize) -> f64 {
        self.user_rate[k] - self.eve_rate[k]
    }

    pub fn secrecy(&self, k: usize) -> f64 {
        self.unclamped(k).max(0.0)
    }

    /// `(min_k w_k R_k, argmin)` with ties resolved to the smallest index.
    pub fn weighted_min(&self, weights: &[f64], clamp: bool) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for k in 0..self.user_rate.len() {
            let r = if clamp { self.secrecy(k) } else { self.unclamped(k) };
            let v = weights[k] * r;
            if v < best.0 {
                best = (v, k);
            }
        }
        best
    }
}

fn report(state: &BeamState, channels: &ChannelSet, config: &SystemConfig) -> Result<RateReport> {
    let links = EffectiveLinks::new(state.phi(), channels, config.phase_noise)?;
    Ok(RateReport::from_links(&links, state.w_mat(), config))
}

/// SINR of user `k`.
pub fn user_sinr(state: &BeamState, channels: &ChannelSet, k: usize, config: &SystemConfig) -> Result<f64> {
    let links = EffectiveLinks::new(state.phi(), channels, config.phase_noise)?;
    Ok(user_sinr_on(&links.users[k], state.w_mat(), k, config))
}

/// Secrecy rate of user `k` in nats, clamped at zero.
pub fn secrecy_rate(state: &BeamState, channels: &ChannelSet, k: usize, config: &SystemConfig) -> Result<f64> {
    Ok(report(state, channels, config)?.secrecy(k))
}

/// Weighted minimum secrecy rate in nats.
pub fn wmsr(state: &BeamState, channels: &ChannelSet, config: &SystemConfig) -> Result<f64> {
    Ok(report(state, channels, config)?.weighted_min(&config.weights, true).0)
}

/// Weighted minimum of the unclamped secrecy rates.
pub fn wmsr_unclamped(state: &BeamState, channels: &ChannelSet, config: &SystemConfig) -> Result<f64> {
    Ok(report(state, channels, config)?.weighted_min(&config.weights, false).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::himodel::{effective_channel, Target};
    use crate::scenario::generate_channels;

    #[test]
    fn distortion_covariance_examples() {
        let w = CMat::from_column_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 2.0)]);
        let d = distortion_covariance(&w, 0.01);
        assert!((d[(0, 0)].re - 0.01).abs() < 1e-15);
        assert!((d[(1, 1)].re - 0.04).abs() < 1e-15);
        assert_eq!(d[(0, 1)], C64::new(0.0, 0.0));
        assert!(distortion_covariance(&w, 0.0).iter().all(|z| z.norm() == 0.0));
        let tr: f64 = (0..2).map(|i| d[(i, i)].re).sum();
        assert!((tr - 0.01 * w.norm_squared()).abs() < 1e-15);
    }

    #[test]
    fn scalar_receiver_distortion() {
        let eff = EffectiveChannel {
            h_hat: CVec::from_element(1, C64::new(1.0, 0.0)),
            h_mat: CMat::zeros(1, 0),
            stacked: CMat::from_element(1, 1, C64::new(1.0, 0.0)),
        };
        let w = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        assert!((receiver_distortion(&w, &eff, 0.0, 0.01) - 0.01).abs() < 1e-15);
        assert_eq!(receiver_distortion(&w, &eff, 0.3, 0.0), 0.0);
    }

    #[test]
    fn sinr_reduces_to_snr() {
        let mut cfg = SystemConfig::default().without_ris();
        cfg.k_users = 1;
        cfg.weights = vec![1.0];
        cfg.kappa_t = 0.0;
        cfg.kappa_r = 0.0;
        let ch = generate_channels(&cfg, 5).unwrap();
        let w = CMat::from_fn(4, 1, |i, _| C64::new(0.3 * i as f64, 0.1));
        let s = BeamState::new(w.clone(), CVec::zeros(0));
        let g = user_sinr(&s, &ch, 0, &cfg).unwrap();
        let expect = ch.h_bu[0].dotc(&w.column(0).into_owned()).norm_sqr() / cfg.noise_user;
        assert!((g - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn zero_stream_has_zero_sinr() {
        let cfg = SystemConfig::default();
        let ch = generate_channels(&cfg, 6).unwrap();
        let mut w = CMat::from_element(4, 3, C64::new(0.2, 0.1));
        w.column_mut(1).fill(C64::new(0.0, 0.0));
        let s = BeamState::new(w, CVec::from_element(16, C64::new(1.0, 0.0)));
        assert_eq!(user_sinr(&s, &ch, 1, &cfg).unwrap(), 0.0);
    }

    // Independent expression built from Gram matrices.
    fn oracle_sinr(g: &CMat, w: &CMat, k: usize, cfg: &SystemConfig) -> f64 {
        let wk = w.column(k).into_owned();
        let sig = wk.dotc(&(g * &wk)).re;
        let mut interf = 0.0;
        for i in 0..w.ncols() {
            if i != k {
                let wi = w.column(i).into_owned();
                interf += wi.dotc(&(g * &wi)).re;
            }
        }
        let ww = w * w.adjoint();
        let mut dg = CMat::zeros(ww.nrows(), ww.ncols());
        for i in 0..ww.nrows() {
            dg[(i, i)] = ww[(i, i)];
        }
        let ups = &dg * C64::new(cfg.kappa_t, 0.0);
        let tr_ups = (&ups * g).trace().re;
        let gr = cfg.kappa_r * ((&ww + &ups) * g).trace().re;
        sig / (interf + tr_ups + gr + cfg.noise_user)
    }

    #[test]
    fn sinr_matches_gram_oracle() {
        let mut cfg = SystemConfig::default();
        cfg.n_tx = 2;
        cfg.k_users = 2;
        cfg.m_ris = 2;
        cfg.weights = vec![1.0, 1.0];
        let ch = generate_channels(&cfg, 17).unwrap();
        let phi = CVec::from_fn(2, |i, _| C64::from_polar(1.0, 0.4 + i as f64));
        let w = CMat::from_fn(2, 2, |i, j| C64::new(0.3 + 0.1 * i as f64, -0.2 * j as f64));
        let s = BeamState::new(w.clone(), phi.clone());
        for k in 0..2 {
            let g = effective_channel(&phi, &ch, Target::User(k)).unwrap().gram();
            let expect = oracle_sinr(&g, &w, k, &cfg);
            let got = user_sinr(&s, &ch, k, &cfg).unwrap();
            assert!((got - expect).abs() <= 1e-10 * expect);
        }
    }

    #[test]
    fn identical_eavesdropper_gives_zero_secrecy() {
        let mut cfg = SystemConfig::default();
        cfg.k_users = 1;
        cfg.weights = vec![1.0];
        cfg.kappa_t = 0.0;
        cfg.kappa_r = 0.0;
        let mut ch = generate_channels(&cfg, 8).unwrap();
        ch.h_be = ch.h_bu[0].clone();
        ch.h_re = ch.h_ru[0].clone();
        let s = BeamState::new(CMat::from_element(4, 1, C64::new(0.5, 0.0)), CVec::from_element(16, C64::new(1.0, 0.0)));
        assert_eq!(secrecy_rate(&s, &ch, 0, &cfg).unwrap(), 0.0);
        assert!(wmsr_unclamped(&s, &ch, &cfg).unwrap().abs() < 1e-12);
    }

    #[test]
    fn silent_eavesdropper_gives_user_rate() {
        let cfg = SystemConfig::default();
        let mut ch = generate_channels(&cfg, 8).unwrap();
        ch.h_be.fill(C64::new(0.0, 0.0));
        ch.h_re.fill(C64::new(0.0, 0.0));
        let s = BeamState::new(CMat::from_element(4, 3, C64::new(0.25, 0.1)), CVec::from_element(16, C64::new(0.0, 1.0)));
        for k in 0..3 {
            let g = user_sinr(&s, &ch, k, &cfg).unwrap();
            assert!((secrecy_rate(&s, &ch, k, &cfg).unwrap() - g.ln_1p()).abs() < 1e-12);
        }
    }

    #[test]
    fn wmsr_is_minimum_of_secrecy_rates() {
        let mut cfg = SystemConfig::default();
        cfg.weights = vec![1.0, 0.7, 1.3];
        let ch = generate_channels(&cfg, 21).unwrap();
        let s = BeamState::new(
            CMat::from_fn(4, 3, |i, j| C64::new(0.2 + 0.05 * i as f64, 0.1 * j as f64)),
            CVec::from_fn(16, |i, _| C64::from_polar(1.0, 0.1 * i as f64)),
        );
        let brute = (0..3)
            .map(|k| cfg.weights[k] * secrecy_rate(&s, &ch, k, &cfg).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(wmsr(&s, &ch, &cfg).unwrap(), brute);
    }

    #[test]
    fn beam_state_vectorization() {
        let w = CMat::from_fn(2, 3, |i, j| C64::new(i as f64, j as f64));
        let s = BeamState::new(w.clone(), CVec::zeros(0));
        assert_eq!(s.w_vec()[3], w[(1, 1)]);
        let t = BeamState::from_vec(s.w_vec().clone(), 2, 3, CVec::zeros(0)).unwrap();
        assert_eq!(t.w_mat(), &w);
        assert!(BeamState::from_vec(s.w_vec().clone(), 4, 3, CVec::zeros(0)).is_err());
    }
}
