//! Quadratic forms `-x^H C x + 2 Re{b^H x} + c` of the weighted lower-bound rate.

use crate::fp::{j_factor, l_factor, AuxState};
use crate::himodel::EffectiveLinks;
use crate::linalg::{herm_form, CMat, CVec, RVec, C64};
use crate::rate::transmit_diag;
use crate::scenario::{ChannelSet, PhaseNoise, SystemConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub c_mat: CMat,
    pub b_vec: CVec,
    pub c_scalar: f64,
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

impl QuadraticForm {
    pub fn zeros(dim: usize) -> Self {
        Self {
            c_mat: CMat::zeros(dim, dim),
            b_vec: CVec::zeros(dim),
            c_scalar: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.b_vec.len()
    }

    /// `-x^H C x + 2 Re{b^H x} + c`.
    pub fn eval(&self, x: &CVec) -> f64 {
        -herm_form(&self.c_mat, x) + 2.0 * self.b_vec.dotc(x).re + self.c_scalar
    }

    /// Gradient with respect to `x^*`: `b - C x`.
    pub fn ascent_direction(&self, x: &CVec) -> CVec {
        &self.b_vec - &self.c_mat * x
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            c_mat: &self.c_mat * real(s),
            b_vec: &self.b_vec * real(s),
            c_scalar: self.c_scalar * s,
        }
    }

    fn add_assign(&mut self, other: &QuadraticForm) {
        self.c_mat += &other.c_mat;
        self.b_vec += &other.b_vec;
        self.c_scalar += other.c_scalar;
    }
}

fn gram_plus_diag(stacked: &CMat, kappa_t: f64) -> CMat {
    let mut g = stacked * stacked.adjoint();
    for i in 0..g.nrows() {
        let d = g[(i, i)].re;
        g[(i, i)] = real(d * (1.0 + kappa_t));
    }
    g
}

fn block_diag_repeat(block: &CMat, k_users: usize) -> CMat {
    let n = block.nrows();
    let mut m = CMat::zeros(n * k_users, n * k_users);
    for k in 0..k_users {
        m.view_mut((k * n, k * n), (n, n)).copy_from(block);
    }
    m
}

/// Weighted lower bound of user `k` as a quadratic form in the stacked precoder.
pub fn w_quadratic(k: usize, links: &EffectiveLinks, aux: &AuxState, k_users: usize, config: &SystemConfig) -> QuadraticForm {
    let user = &links.users[k].stacked;
    let eve = &links.eve.stacked;
    let n = user.nrows();
    let nk = n * k_users;
    let mut form = QuadraticForm::zeros(nk);

    // Legitimate-rate bound.
    let u = &aux.u[k];
    let v = aux.v[k];
    let uu = u.norm_squared();
    let c1 = block_diag_repeat(&gram_plus_diag(user, config.kappa_t), k_users) * real((1.0 + config.kappa_r) * uu);
    let mut b1 = CVec::zeros(nk);
    b1.rows_mut(k * n, n).copy_from(&((user * u) * real((1.0 + v).sqrt())));
    form.add_assign(&QuadraticForm {
        c_mat: c1,
        b_vec: b1,
        c_scalar: v.ln_1p() - v - config.noise_user * uu,
    });

    // Eavesdropper bound.
    let d = aux.d[k];
    let ge = eve * eve.adjoint();
    let mut c2 = CMat::zeros(nk, nk);
    c2.view_mut((k * n, k * n), (n, n)).copy_from(&ge);
    for i in 0..nk {
        c2[(i, i)] += real(config.kappa_t * ge[(i % n, i % n)].re);
    }
    form.add_assign(&QuadraticForm {
        c_mat: c2 * real(d / config.noise_eve),
        b_vec: CVec::zeros(nk),
        c_scalar: d.ln() + 1.0 - d,
    });

    // Distortion bound.
    let l = l_factor(&links.eve, k_users, config.kappa_t);
    let p = aux.p_w;
    let q = &aux.q_w;
    let qq = q.norm_squared();
    let mut c3 = CMat::zeros(nk, nk);
    for i in 0..nk {
        c3[(i, i)] = real(p * qq * l[i] * l[i]);
    }
    let b3 = CVec::from_fn(nk, |i, _| q[i] * (p * l[i]));
    form.add_assign(&QuadraticForm {
        c_mat: c3,
        b_vec: b3,
        c_scalar: -p * qq * config.noise_eve - p + p.ln() + 1.0,
    });

    form.scaled(config.weights[k])
}

/// Coefficients of one link as a function of the reflection vector.
struct PhiLink<'a> {
    /// Column `m` is `h_r[m] H_br[m, :]^H`.
    cascade: CMat,
    h_b: &'a CVec,
    mean: f64,
    spread: f64,
}

impl<'a> PhiLink<'a> {
    fn new(h_r: &CVec, h_b: &'a CVec, h_br: &CMat, noise: PhaseNoise) -> Self {
        let (m, n) = h_br.shape();
        let cascade = CMat::from_fn(n, m, |j, i| h_r[i] * h_br[(i, j)].conj());
        Self {
            cascade,
            h_b,
            mean: noise.first_moment(),
            spread: noise.spread(),
        }
    }

    /// `Tr[S H H^H]` for Hermitian `S` as a form `phi^H C phi + 2 Re{b^H phi} + c`.
    fn trace_form(&self, s: &CMat) -> (CMat, CVec, f64) {
        let sb = s * &self.cascade;
        let x = self.cascade.adjoint() * &sb;
        let m = x.nrows();
        let a2 = self.mean * self.mean;
        let s2 = self.spread * self.spread;
        let c = CMat::from_fn(m, m, |i, j| {
            let base = x[(i, j)].conj() * a2;
            if i == j {
                base + real(s2 * x[(i, i)].re)
            } else {
                base
            }
        });
        let y = sb.adjoint() * self.h_b;
        let b = y.map(|z| z.conj() * self.mean);
        let c0 = self.h_b.dotc(&(s * self.h_b)).re;
        (c, b, c0)
    }

    /// `Re sum_col Y[:, col]^H H[:, col]` as `Re{b^H phi} + c`.
    fn linear_form(&self, y: &CMat) -> (CVec, f64) {
        let m = self.cascade.ncols();
        let head = self.cascade.adjoint() * y.column(0);
        let b = CVec::from_fn(m, |i, _| {
            let mut z = head[i].conj() * self.mean;
            if y.ncols() > 1 {
                z += y.column(i + 1).dotc(&self.cascade.column(i)) * self.spread;
            }
            z
        });
        let c0 = y.column(0).dotc(self.h_b).re;
        (b, c0)
    }
}

fn diag_matrix(d: &RVec) -> CMat {
    crate::linalg::diag_real(d)
}

/// Weighted lower bound of user `k` as a quadratic form in the reflection vector.
pub fn phi_quadratic(k: usize, w_mat: &CMat, aux: &AuxState, channels: &ChannelSet, config: &SystemConfig) -> QuadraticForm {
    let noise = config.phase_noise;
    let user = PhiLink::new(&channels.h_ru[k], &channels.h_bu[k], &channels.h_br, noise);
    let eve = PhiLink::new(&channels.h_re, &channels.h_be, &channels.h_br, noise);
    let m = channels.m_ris();
    let mut form = QuadraticForm::zeros(m);
    let ups = diag_matrix(&transmit_diag(w_mat).map(|t| config.kappa_t * t));
    let wk = w_mat.column(k).into_owned();

    // Legitimate-rate bound.
    let u = &aux.u[k];
    let v = aux.v[k];
    let uu = u.norm_squared();
    let alpha1 = (1.0 + config.kappa_r) * uu;
    let s_user = w_mat * w_mat.adjoint() + &ups;
    let (cs, bs, cs0) = user.trace_form(&s_user);
    let y = CMat::from_fn(w_mat.nrows(), u.len(), |i, col| u[col].conj() * wk[i]);
    let (by, cy0) = user.linear_form(&y);
    let root = (1.0 + v).sqrt();
    form.add_assign(&QuadraticForm {
        c_mat: cs * real(alpha1),
        b_vec: by * real(root) - bs * real(alpha1),
        c_scalar: v.ln_1p() - v - config.noise_user * uu - alpha1 * cs0 + 2.0 * root * cy0,
    });

    // Eavesdropper bound.
    let d = aux.d[k];
    let scale = d / config.noise_eve;
    let s_eve = &wk * wk.adjoint() + &ups;
    let (ce, be, ce0) = eve.trace_form(&s_eve);
    form.add_assign(&QuadraticForm {
        c_mat: ce * real(scale),
        b_vec: be * real(-scale),
        c_scalar: -d - scale * ce0 + d.ln() + 1.0,
    });

    // Distortion bound.
    let p = aux.p_phi;
    let q = &aux.q_phi;
    let qq = q.norm_squared();
    let (cu, bu, cu0) = eve.trace_form(&ups);
    let j = j_factor(w_mat, config.kappa_t);
    let yq = CMat::from_fn(q.nrows(), q.ncols(), |i, col| q[(i, col)] * j[i]);
    let (bq, cq0) = eve.linear_form(&yq);
    form.add_assign(&QuadraticForm {
        c_mat: cu * real(p * qq),
        b_vec: bq * real(p) - bu * real(p * qq),
        c_scalar: -p * qq * (cu0 + config.noise_eve) + 2.0 * p * cq0 - p + p.ln() + 1.0,
    });

    form.scaled(config.weights[k])
}

/// Forms of every user in the stacked precoder.
pub fn w_forms(links: &EffectiveLinks, aux: &AuxState, config: &SystemConfig) -> Vec<QuadraticForm> {
    let k_users = links.users.len();
    (0..k_users).map(|k| w_quadratic(k, links, aux, k_users, config)).collect()
}

/// Forms of every user in the reflection vector.
pub fn phi_forms(w_mat: &CMat, aux: &AuxState, channels: &ChannelSet, config: &SystemConfig) -> Vec<QuadraticForm> {
    (0..channels.k_users())
        .map(|k| phi_quadratic(k, w_mat, aux, channels, config))
        .collect()
}

/// `min_k` of the form values.
pub fn min_value(forms: &[QuadraticForm], x: &CVec) -> f64 {
    forms.iter().map(|f| f.eval(x)).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp::{lower_bound_on, refresh_aux, BoundMode};
    use crate::rate::BeamState;
    use crate::scenario::generate_channels;

    fn setup(m: usize, seed: u64) -> (SystemConfig, ChannelSet, BeamState) {
        let mut cfg = SystemConfig::default();
        cfg.m_ris = m;
        cfg.weights = vec![1.0, 0.8, 1.4];
        let ch = generate_channels(&cfg, seed).unwrap();
        let w = CMat::from_fn(4, 3, |i, j| C64::new(0.3 - 0.1 * i as f64, 0.05 * (i + j) as f64));
        let w = &w / real(w.norm());
        let phi = CVec::from_fn(m, |i, _| C64::from_polar(1.0, 1.3 * i as f64));
        (cfg, ch, BeamState::new(w, phi))
    }

    #[test]
    fn w_form_matches_bound_away_from_expansion_point() {
        let (cfg, ch, s) = setup(4, 2);
        let links = EffectiveLinks::new(s.phi(), &ch, cfg.phase_noise).unwrap();
        let aux = refresh_aux(&links, s.w_mat(), &cfg);
        let forms = w_forms(&links, &aux, &cfg);
        let other = CVec::from_fn(12, |i, _| C64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()) * 0.2);
        let t = s.with_w_vec(other.clone());
        for k in 0..3 {
            let direct = cfg.weights[k] * lower_bound_on(&links, t.w_mat(), &aux, k, BoundMode::W, &cfg);
            let got = forms[k].eval(&other);
            assert!((got - direct).abs() <= 1e-8 * (1.0 + direct.abs()), "{got} vs {direct}");
        }
    }

    #[test]
    fn phi_form_matches_bound_away_from_expansion_point() {
        let (cfg, ch, s) = setup(5, 4);
        let links = EffectiveLinks::new(s.phi(), &ch, cfg.phase_noise).unwrap();
        let aux = refresh_aux(&links, s.w_mat(), &cfg);
        let forms = phi_forms(s.w_mat(), &aux, &ch, &cfg);
        let phi2 = CVec::from_fn(5, |i, _| C64::from_polar(1.0, -0.4 * i as f64 + 2.0));
        let links2 = EffectiveLinks::new(&phi2, &ch, cfg.phase_noise).unwrap();
        for k in 0..3 {
            let direct = cfg.weights[k] * lower_bound_on(&links2, s.w_mat(), &aux, k, BoundMode::Phi, &cfg);
            let got = forms[k].eval(&phi2);
            assert!((got - direct).abs() <= 1e-8 * (1.0 + direct.abs()), "{got} vs {direct}");
        }
    }

    #[test]
    fn phi_form_ideal_model() {
        let (cfg, ch, s) = setup(3, 5);
        let cfg = cfg.ideal_hardware();
        let links = EffectiveLinks::new(s.phi(), &ch, cfg.phase_noise).unwrap();
        let aux = refresh_aux(&links, s.w_mat(), &cfg);
        let forms = phi_forms(s.w_mat(), &aux, &ch, &cfg);
        let phi2 = CVec::from_fn(3, |i, _| C64::from_polar(1.0, 0.2 + i as f64));
        let links2 = EffectiveLinks::new(&phi2, &ch, cfg.phase_noise).unwrap();
        for k in 0..3 {
            let direct = cfg.weights[k] * lower_bound_on(&links2, s.w_mat(), &aux, k, BoundMode::Phi, &cfg);
            assert!((forms[k].eval(&phi2) - direct).abs() <= 1e-8 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn no_reflected_path_gives_constant_form() {
        let (cfg, mut ch, s) = setup(4, 6);
        for h in ch.h_ru.iter_mut() {
            h.fill(C64::new(0.0, 0.0));
        }
        ch.h_re.fill(C64::new(0.0, 0.0));
        let links = EffectiveLinks::new(s.phi(), &ch, cfg.phase_noise).unwrap();
        let aux = refresh_aux(&links, s.w_mat(), &cfg);
        for f in phi_forms(s.w_mat(), &aux, &ch, &cfg) {
            assert!(f.c_mat.norm() == 0.0 && f.b_vec.norm() == 0.0);
        }
    }

    #[test]
    fn weight_scales_form() {
        let (mut cfg, ch, s) = setup(4, 7);
        let links = EffectiveLinks::new(s.phi(), &ch, cfg.phase_noise).unwrap();
        let aux = refresh_aux(&links, s.w_mat(), &cfg);
        let a = w_quadratic(1, &links, &aux, 3, &cfg);
        cfg.weights[1] *= 2.0;
        let b = w_quadratic(1, &links, &aux, 3, &cfg);
        assert!((&b.c_mat - &a.c_mat * real(2.0)).norm() <= 1e-12 * a.c_mat.norm());
        assert!((b.c_scalar - 2.0 * a.c_scalar).abs() <= 1e-12 * a.c_scalar.abs());
    }
}
