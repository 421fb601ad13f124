//! Fractional-programming auxiliaries and the lower-bound secrecy rate.

use crate::error::Result;
use crate::himodel::{EffectiveChannel, EffectiveLinks};
use crate::linalg::{CMat, CVec, RVec, C64};
use crate::rate::{transmit_diag, BeamState, LinkTerms};
use crate::scenario::{ChannelSet, SystemConfig};

/// All auxiliary variables of the lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxState {
    pub u: Vec<CVec>,
    pub v: Vec<f64>,
    pub d: Vec<f64>,
    pub p_w: f64,
    pub q_w: CVec,
    pub p_phi: f64,
    pub q_phi: CMat,
}

/// Which bound is used for the eavesdropper-distortion term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// Bound that is quadratic in the stacked precoder.
    W,
    /// Bound that is quadratic in the reflection vector.
    Phi,
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Optimal `(u_k, v_k)` for every user.
pub fn user_aux(links: &EffectiveLinks, w_mat: &CMat, config: &SystemConfig) -> (Vec<CVec>, Vec<f64>) {
    let mut us = Vec::with_capacity(w_mat.ncols());
    let mut vs = Vec::with_capacity(w_mat.ncols());
    for (k, eff) in links.users.iter().enumerate() {
        let t = LinkTerms::new(eff, w_mat, config.kappa_t);
        let denom = (1.0 + config.kappa_r) * t.total() + config.noise_user;
        let signal = t.stream_power[k];
        let v = signal / (denom - signal);
        let a = eff.stacked.adjoint() * w_mat.column(k);
        us.push(a * real((1.0 + v).sqrt() / denom));
        vs.push(v);
    }
    (us, vs)
}

/// Optimal `d_k` for every user.
pub fn eve_aux(links: &EffectiveLinks, w_mat: &CMat, config: &SystemConfig) -> Vec<f64> {
    let t = LinkTerms::new(&links.eve, w_mat, config.kappa_t);
    (0..w_mat.ncols())
        .map(|k| 1.0 / (1.0 + (t.stream_power[k] + t.distortion) / config.noise_eve))
        .collect()
}

/// Diagonal of `L` with `L L^T = kappa_t (I_K kron diag(H_E H_E^H))`, in column-stacked order.
pub fn l_factor(eve: &EffectiveChannel, k_users: usize, kappa_t: f64) -> RVec {
    let n = eve.stacked.nrows();
    RVec::from_fn(n * k_users, |i, _| (kappa_t * eve.stacked.row(i % n).norm_squared()).sqrt())
}

/// Diagonal of `J = sqrt(Upsilon_t)`.
pub fn j_factor(w_mat: &CMat, kappa_t: f64) -> RVec {
    transmit_diag(w_mat).map(|t| (kappa_t * t).sqrt())
}

/// Optimal `(p_w, q_w)`.
pub fn f3_aux_w(links: &EffectiveLinks, w_mat: &CMat, config: &SystemConfig) -> (f64, CVec) {
    let l = l_factor(&links.eve, w_mat.ncols(), config.kappa_t);
    let w = crate::linalg::vec_columns(w_mat);
    let y = CVec::from_fn(w.len(), |i, _| w[i] * l[i]);
    let a = y.norm_squared();
    let p = 1.0 + a / config.noise_eve;
    (p, y / real(a + config.noise_eve))
}

/// Optimal `(p_phi, Q_phi)`.
pub fn f3_aux_phi(links: &EffectiveLinks, w_mat: &CMat, config: &SystemConfig) -> (f64, CMat) {
    let y = scaled_rows(&j_factor(w_mat, config.kappa_t), &links.eve.stacked);
    let a = y.norm_squared();
    let p = 1.0 + a / config.noise_eve;
    (p, y / real(a + config.noise_eve))
}

fn scaled_rows(d: &RVec, m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[i])
}

/// Recompute every auxiliary at the current point.
pub fn refresh_aux(links: &EffectiveLinks, w_mat: &CMat, config: &SystemConfig) -> AuxState {
    let (u, v) = user_aux(links, w_mat, config);
    let d = eve_aux(links, w_mat, config);
    let (p_w, q_w) = f3_aux_w(links, w_mat, config);
    let (p_phi, q_phi) = f3_aux_phi(links, w_mat, config);
    AuxState {
        u,
        v,
        d,
        p_w,
        q_w,
        p_phi,
        q_phi,
    }
}

fn links_for(state: &BeamState, channels: &ChannelSet, config: &SystemConfig) -> Result<EffectiveLinks> {
    EffectiveLinks::new(state.phi(), channels, config.phase_noise)
}

/// Optimal `(u_k, v_k)` at a state.
pub fn update_user_aux(state: &BeamState, channels: &ChannelSet, config: &SystemConfig) -> Result<(Vec<CVec>, Vec<f64>)> {
    Ok(user_aux(&links_for(state, channels, config)?, state.w_mat(), config))
}

/// Optimal `d_k` at a state.
pub fn update_eve_aux(state: &BeamState, channels: &ChannelSet, config: &SystemConfig) -> Result<Vec<f64>> {
    Ok(eve_aux(&links_for(state, channels, config)?, state.w_mat(), config))
}

/// Optimal `(p_w, q_w)` at a state.
pub fn update_f3_aux_w(state: &BeamState, channels: &ChannelSet, config: &SystemConfig) -> Result<(f64, CVec)> {
    Ok(f3_aux_w(&links_for(state, channels, config)?, state.w_mat(), config))
}

/// Optimal `(p_phi, Q_phi)` at a state.
pub fn update_f3_aux_phi(state: &BeamState, channels: &ChannelSet, config: &SystemConfig) -> Result<(f64, CMat)> {
    Ok(f3_aux_phi(&links_for(state, channels, config)?, state.w_mat(), config))
}

/// Lower bound of the legitimate rate of user `k`.
pub fn f1_bound(eff: &EffectiveChannel, w_mat: &CMat, k: usize, u: &CVec, v: f64, config: &SystemConfig) -> f64 {
    let t = LinkTerms::new(eff, w_mat, config.kappa_t);
    let a = eff.stacked.adjoint() * w_mat.column(k);
    let uu = u.norm_squared();
    v.ln_1p() - v - config.noise_user * uu - (1.0 + config.kappa_r) * uu * t.total()
        + 2.0 * (1.0 + v).sqrt() * u.dotc(&a).re
}

/// Lower bound of `-ln(1 + (||H_E^H w_k||^2 + Tr[Upsilon H_E H_E^H]) / noise)`.
pub fn f2_bound(eve: &EffectiveChannel, w_mat: &CMat, k: usize, d: f64, config: &SystemConfig) -> f64 {
    let t = LinkTerms::new(eve, w_mat, config.kappa_t);
    -d * (1.0 + (t.stream_power[k] + t.distortion) / config.noise_eve) + d.ln() + 1.0
}

/// Exact distortion term `ln(1 + Tr[Upsilon H_E H_E^H] / noise)`.
pub fn f3_exact(eve: &EffectiveChannel, w_mat: &CMat, config: &SystemConfig) -> f64 {
    (LinkTerms::new(eve, w_mat, config.kappa_t).distortion / config.noise_eve).ln_1p()
}

/// Lower bound of the distortion term that is quadratic in the stacked precoder.
pub fn f3_bound_w(eve: &EffectiveChannel, w_mat: &CMat, p: f64, q: &CVec, config: &SystemConfig) -> f64 {
    let l = l_factor(eve, w_mat.ncols(), config.kappa_t);
    let w = crate::linalg::vec_columns(w_mat);
    let y = CVec::from_fn(w.len(), |i, _| w[i] * l[i]);
    let bracket = (y.norm_squared() + config.noise_eve) * q.norm_squared() - 2.0 * q.dotc(&y).re + 1.0;
    -p * bracket + p.ln() + 1.0
}

/// Lower bound of the distortion term that is quadratic in the reflection vector.
pub fn f3_bound_phi(eve: &EffectiveChannel, w_mat: &CMat, p: f64, q: &CMat, config: &SystemConfig) -> f64 {
    let y = scaled_rows(&j_factor(w_mat, config.kappa_t), &eve.stacked);
    let cross: f64 = q.iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum();
    let bracket = (y.norm_squared() + config.noise_eve) * q.norm_squared() - 2.0 * cross + 1.0;
    -p * bracket + p.ln() + 1.0
}

/// Lower bound of the unclamped secrecy rate of user `k` (unweighted).
pub fn lower_bound_on(
    links: &EffectiveLinks,
    w_mat: &CMat,
    aux: &AuxState,
    k: usize,
    mode: BoundMode,
    config: &SystemConfig,
) -> f64 {
    let f1 = f1_bound(&links.users[k], w_mat, k, &aux.u[k], aux.v[k], config);
    let f2 = f2_bound(&links.eve, w_mat, k, aux.d[k], config);
    let f3 = match mode {
        BoundMode::W => f3_bound_w(&links.eve, w_mat, aux.p_w, &aux.q_w, config),
        BoundMode::Phi => f3_bound_phi(&links.eve, w_mat, aux.p_phi, &aux.q_phi, config),
    };
    f1 + f2 + f3
}

/// Lower bound of the unclamped secrecy rate of user `k` at a state.
pub fn lower_bound_rate(
    state: &BeamState,
    aux: &AuxState,
    channels: &ChannelSet,
    k: usize,
    mode: BoundMode,
    config: &SystemConfig,
) -> Result<f64> {
    let links = links_for(state, channels, config)?;
    Ok(lower_bound_on(&links, state.w_mat(), aux, k, mode, config))
}
