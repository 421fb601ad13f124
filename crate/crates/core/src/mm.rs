//! Smoothed max-min objective, closed-form minorizers for both blocks, SQUAREM
//! acceleration and the alternating MM loop.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::fp::{f3_aux_phi, refresh_aux};
use crate::himodel::EffectiveLinks;
use crate::linalg::{power_iteration, CVec, C64};
use crate::quadform::{phi_forms, w_forms, QuadraticForm};
use crate::rate::{BeamState, RateReport};
use crate::rng::{stream, STREAM_POWER};
use crate::scenario::{ChannelSet, SystemConfig};
use crate::trace::{relative_change, BlockObjectives, RunOptions, RunStatus, RunTrace, TraceRow};

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 500;
const SQUAREM_MAX_HALVINGS: usize = 20;

/// `-(1/zeta) ln sum_k exp(-zeta r_k)`.
pub fn smoothed_min(values: &[f64], zeta: f64) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !lo.is_finite() {
        return lo;
    }
    let s: f64 = values.iter().map(|r| (-zeta * (r - lo)).exp()).sum();
    let out = lo - s.ln() / zeta;
    debug_assert!(out <= lo + 1e-12 && out >= lo - (values.len() as f64).ln() / zeta - 1e-12);
    out
}

/// Softmin weights `exp(-zeta r_k) / sum_j exp(-zeta r_j)`.
pub fn mm_weights(values: &[f64], zeta: f64) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = values.iter().map(|r| (-zeta * (r - lo)).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Smoothed minimum of the form values at `x`.
pub fn smoothed_objective(forms: &[QuadraticForm], x: &CVec, zeta: f64) -> f64 {
    let vals: Vec<f64> = forms.iter().map(|f| f.eval(x)).collect();
    smoothed_min(&vals, zeta)
}

fn weighted_gradient(forms: &[QuadraticForm], x: &CVec, zeta: f64) -> (f64, CVec) {
    let vals: Vec<f64> = forms.iter().map(|f| f.eval(x)).collect();
    let h = mm_weights(&vals, zeta);
    let mut g = CVec::zeros(x.len());
    for (f, hk) in forms.iter().zip(&h) {
        g += f.ascent_direction(x) * C64::new(*hk, 0.0);
    }
    (smoothed_min(&vals, zeta), g)
}

/// Quadratic minorizer `alpha ||w||^2 + 2 Re{v^H w} + c` of the smoothed objective on the power ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateW {
    pub v_bar: CVec,
    pub alpha_bar: f64,
    pub c_bar: f64,
    /// Expansion point.
    pub center: CVec,
}

impl SurrogateW {
    pub fn eval(&self, w: &CVec) -> f64 {
        self.alpha_bar * w.norm_squared() + 2.0 * self.v_bar.dotc(w).re + self.c_bar
    }
}

/// Minorizer `2 Re{v^H phi} + c` of the smoothed objective on the unit-modulus torus.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePhi {
    pub v_bar: CVec,
    pub beta_bar: f64,
    pub c_bar: f64,
    pub center: CVec,
}

impl SurrogatePhi {
    pub fn eval(&self, phi: &CVec) -> f64 {
        2.0 * self.v_bar.dotc(phi).re + self.c_bar
    }
}

pub fn surrogate_w_params(forms: &[QuadraticForm], w_cur: &CVec, zeta: f64, p_max: f64) -> SurrogateW {
    let (f, g) = weighted_gradient(forms, w_cur, zeta);
    let sp = p_max.sqrt();
    let mut max_tr = 0.0f64;
    let mut max_o = 0.0f64;
    for form in forms {
        let tr: f64 = (0..form.dim()).map(|i| form.c_mat[(i, i)].re).sum();
        let cb = (&form.c_mat * &form.b_vec).norm();
        let o = p_max * form.c_mat.norm_squared() + form.b_vec.norm_squared() + 2.0 * sp * cb;
        max_tr = max_tr.max(tr);
        max_o = max_o.max(o);
    }
    let alpha_bar = -max_tr - 2.0 * zeta * max_o;
    let v_bar = &g - w_cur * C64::new(alpha_bar, 0.0);
    let c_bar = f - 2.0 * g.dotc(w_cur).re + alpha_bar * w_cur.norm_squared();
    SurrogateW {
        v_bar,
        alpha_bar,
        c_bar,
        center: w_cur.clone(),
    }
}

/// Maximizer of the precoder surrogate over `||w||^2 <= p_max`.
pub fn mm_w_step(surr: &SurrogateW, p_max: f64) -> CVec {
    let nv = surr.v_bar.norm();
    if nv == 0.0 && surr.alpha_bar == 0.0 {
        return surr.center.clone();
    }
    let scale = (-surr.alpha_bar).max(nv / p_max.sqrt());
    &surr.v_bar / C64::new(scale, 0.0)
}

pub fn surrogate_phi_params(forms: &[QuadraticForm], phi_cur: &CVec, zeta: f64) -> SurrogatePhi {
    let (f, g) = weighted_gradient(forms, phi_cur, zeta);
    let m = phi_cur.len() as f64;
    let mut rng = stream(0, STREAM_POWER);
    let mut max_rho = 0.0f64;
    let mut max_o = 0.0f64;
    for form in forms {
        let rho = power_iteration(&form.c_mat, &mut rng, POWER_TOL, POWER_MAX_ITER);
        let cb: f64 = (&form.c_mat * &form.b_vec).iter().map(|z| z.norm()).sum();
        let o = form.b_vec.norm_squared() + m * rho * rho + 2.0 * cb;
        max_rho = max_rho.max(rho);
        max_o = max_o.max(o);
    }
    let beta_bar = -max_rho - 2.0 * zeta * max_o;
    let v_bar = &g - phi_cur * C64::new(beta_bar, 0.0);
    let c_bar = f + 2.0 * m * beta_bar - 2.0 * g.dotc(phi_cur).re;
    SurrogatePhi {
        v_bar,
        beta_bar,
        c_bar,
        center: phi_cur.clone(),
    }
}

/// Element-wise phase alignment with the surrogate's linear term.
pub fn mm_phi_step(surr: &SurrogatePhi) -> CVec {
    CVec::from_fn(surr.v_bar.len(), |m, _| {
        let v = surr.v_bar[m];
        if v.norm() == 0.0 {
            let c = surr.center[m];
            c / c.norm()
        } else {
            C64::from_polar(1.0, v.arg())
        }
    })
}

/// One SQUAREM step around the fixed-point map `map`.
///
/// The result is never worse than two plain map applications under `objective`.
pub fn squarem_accelerate<F, P, O>(x_cur: &CVec, map: F, project: P, objective: O) -> CVec
where
    F: Fn(&CVec) -> CVec,
    P: Fn(&CVec) -> CVec,
    O: Fn(&CVec) -> f64,
{
    let x1 = map(x_cur);
    let x2 = map(&x1);
    let j1 = &x1 - x_cur;
    let j2 = &x2 - &x1 - &j1;
    let n2 = j2.norm();
    if n2 == 0.0 {
        return x2;
    }
    let target = objective(&x2);
    let mut alpha = -j1.norm() / n2;
    for _ in 0..SQUAREM_MAX_HALVINGS {
        let cand = project(&(x_cur - &j1 * C64::new(2.0 * alpha, 0.0) + &j2 * C64::new(alpha * alpha, 0.0)));
        if objective(&cand) >= target {
            return cand;
        }
        alpha = (alpha - 1.0) / 2.0;
    }
    x2
}

/// Rescale onto the power ball when outside it.
pub fn project_ball(w: &CVec, p_max: f64) -> CVec {
    let p = w.norm_squared();
    if p > p_max {
        w * C64::new((p_max / p).sqrt(), 0.0)
    } else {
        w.clone()
    }
}

/// Per-entry phase projection; zero entries fall back to `fallback`.
pub fn project_torus(phi: &CVec, fallback: &CVec) -> CVec {
    CVec::from_fn(phi.len(), |m, _| {
        let r = phi[m].norm();
        if r > 0.0 && r.is_finite() {
            phi[m] / r
        } else {
            fallback[m]
        }
    })
}

fn w_block(forms: &[QuadraticForm], w: &CVec, zeta: f64, p_max: f64) -> CVec {
    squarem_accelerate(
        w,
        |x| mm_w_step(&surrogate_w_params(forms, x, zeta, p_max), p_max),
        |x| project_ball(x, p_max),
        |x| smoothed_objective(forms, x, zeta),
    )
}

fn phi_block(forms: &[QuadraticForm], phi: &CVec, zeta: f64) -> CVec {
    squarem_accelerate(
        phi,
        |x| mm_phi_step(&surrogate_phi_params(forms, x, zeta)),
        |x| project_torus(x, phi),
        |x| smoothed_objective(forms, x, zeta),
    )
}

fn check_finite(value: f64, step: &str, iteration: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical {
            step: step.to_string(),
            iteration,
            detail: format!("value {value}"),
        })
    }
}

/// Alternating MM optimization of precoder and reflection vector.
pub fn bcd_mm(config: &SystemConfig, channels: &ChannelSet, init: &BeamState) -> Result<(BeamState, RunTrace)> {
    bcd_mm_with(config, channels, init, &RunOptions::default())
}

pub fn bcd_mm_with(
    config: &SystemConfig,
    channels: &ChannelSet,
    init: &BeamState,
    options: &RunOptions,
) -> Result<(BeamState, RunTrace)> {
    config.validate()?;
    init.validate(config.p_max)?;
    let eval_cfg = options.evaluation.as_ref().unwrap_or(config);
    let start = Instant::now();
    let mut trace = RunTrace::new();
    let mut state = init.clone();
    let mut zeta = config.mm.zeta_init;
    let update_phi = !options.freeze_phi && channels.m_ris() > 0;
    let links0 = EffectiveLinks::new(state.phi(), channels, config.phase_noise)?;
    let mut prev = RateReport::from_links(&links0, state.w_mat(), config).weighted_min(&config.weights, false).0;
    for n in 1..=config.mm.max_iter {
        let links = EffectiveLinks::new(state.phi(), channels, config.phase_noise)?;
        let mut aux = refresh_aux(&links, state.w_mat(), config);
        let wf = w_forms(&links, &aux, config);
        let w_before = smoothed_objective(&wf, state.w_vec(), zeta);
        check_finite(w_before, "precoder surrogate", n)?;
        let w_new = w_block(&wf, state.w_vec(), zeta, config.p_max);
        if w_new.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            check_finite(f64::NAN, "precoder update", n)?;
        }
        state = state.with_w_vec(w_new);
        let w_after = smoothed_objective(&wf, state.w_vec(), zeta);
        check_finite(w_after, "precoder update", n)?;
        let mut blocks = BlockObjectives {
            w_before,
            w_after,
            phi_before: f64::NAN,
            phi_after: f64::NAN,
        };
        let mut bound = w_after;
        if update_phi {
            let (p, q) = f3_aux_phi(&links, state.w_mat(), config);
            aux.p_phi = p;
            aux.q_phi = q;
            let pf = phi_forms(state.w_mat(), &aux, channels, config);
            blocks.phi_before = smoothed_objective(&pf, state.phi(), zeta);
            check_finite(blocks.phi_before, "reflection surrogate", n)?;
            let phi_new = phi_block(&pf, state.phi(), zeta);
            state = state.with_phi(phi_new);
            blocks.phi_after = smoothed_objective(&pf, state.phi(), zeta);
            check_finite(blocks.phi_after, "reflection update", n)?;
            bound = blocks.phi_after;
        }
        let links = EffectiveLinks::new(state.phi(), channels, config.phase_noise)?;
        let current = RateReport::from_links(&links, state.w_mat(), config).weighted_min(&config.weights, false).0;
        check_finite(current, "rate evaluation", n)?;
        let true_wmsr = if options.evaluation.is_some() {
            let l = EffectiveLinks::new(state.phi(), channels, eval_cfg.phase_noise)?;
            RateReport::from_links(&l, state.w_mat(), eval_cfg).weighted_min(&eval_cfg.weights, true).0
        } else {
            current.max(0.0)
        };
        trace.rows.push(TraceRow {
            iteration: n,
            bound_objective: bound,
            true_wmsr,
            zeta: Some(zeta),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            blocks: Some(blocks),
        });
        trace.iterations = n;
        zeta = zeta.powf(config.mm.zeta_growth).min(config.mm.zeta_max);
        if relative_change(current, prev) <= config.mm.tolerance {
            trace.status = RunStatus::Converged;
            break;
        }
        prev = current;
    }
    trace.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((state, trace))
}

/// Maximize the smoothed objective over the precoder only, starting from `w`.
pub fn refit_precoder(config: &SystemConfig, channels: &ChannelSet, state: &BeamState) -> Result<BeamState> {
    let opts = RunOptions {
        freeze_phi: true,
        evaluation: None,
    };
    let one = SystemConfig {
        mm: crate::scenario::MmParams {
            max_iter: 1,
            ..config.mm
        },
        ..config.clone()
    };
    Ok(bcd_mm_with(&one, channels, state, &opts)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_cvec(rng: &mut ChaCha20Rng, n: usize, s: f64) -> CVec {
        CVec::from_fn(n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * s)
    }

    fn random_forms(rng: &mut ChaCha20Rng, k: usize, n: usize) -> Vec<QuadraticForm> {
        (0..k)
            .map(|_| {
                let a = CMat::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
                QuadraticForm {
                    c_mat: a.adjoint() * &a,
                    b_vec: random_cvec(rng, n, 2.0),
                    c_scalar: rng.gen::<f64>(),
                }
            })
            .collect()
    }

    fn random_torus(rng: &mut ChaCha20Rng, m: usize) -> CVec {
        CVec::from_fn(m, |_, _| C64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU))
    }

    fn random_ball(rng: &mut ChaCha20Rng, n: usize, p: f64) -> CVec {
        let x = random_cvec(rng, n, 1.0);
        let r = p.sqrt() * rng.gen::<f64>().sqrt();
        &x * C64::new(r / x.norm(), 0.0)
    }

    #[test]
    fn smoothed_min_examples() {
        assert_eq!(smoothed_min(&[0.7], 3.0), 0.7);
        assert!((smoothed_min(&[0.0; 3], 2.0) + 3f64.ln() / 2.0).abs() < 1e-15);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 10.0).collect();
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let s = smoothed_min(&v, 100.0);
            assert!(s <= lo && s >= lo - 5f64.ln() / 100.0);
        }
        assert!(smoothed_min(&[1e6, 2e6], 500.0).is_finite());
    }

    #[test]
    fn weights_examples() {
        let h = mm_weights(&[2.0; 4], 7.0);
        assert!(h.iter().all(|x| (x - 0.25).abs() < 1e-15));
        let h = mm_weights(&[0.0, 1.0, 2.0], 100.0);
        assert!(h[0] >= 1.0 - 1e-6);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..50 {
            let v: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() * 50.0).collect();
            let h = mm_weights(&v, 3.0);
            assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(h.iter().all(|x| *x >= 0.0));
        }
    }

    #[test]
    fn zero_forms_give_flat_surrogates() {
        let forms = vec![QuadraticForm::zeros(3); 2];
        let w = CVec::from_element(3, C64::new(0.3, 0.1));
        let s = surrogate_w_params(&forms, &w, 2.0, 1.0);
        assert_eq!(s.alpha_bar, 0.0);
        assert!(s.v_bar.norm() == 0.0);
        assert_eq!(mm_w_step(&s, 1.0), w);
        let phi = CVec::from_element(3, C64::new(0.0, 1.0));
        let s = surrogate_phi_params(&forms, &phi, 2.0);
        assert_eq!(s.beta_bar, 0.0);
        assert!(s.v_bar.norm() == 0.0);
        assert_eq!(mm_phi_step(&s), phi);
    }

    #[test]
    fn w_surrogate_minorizes_and_touches() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let p = 2.0;
        for _ in 0..10 {
            let forms = random_forms(&mut rng, 3, 4);
            let w0 = random_ball(&mut rng, 4, p);
            let zeta = 1.0 + 10.0 * rng.gen::<f64>();
            let s = surrogate_w_params(&forms, &w0, zeta, p);
            assert!(s.alpha_bar <= 0.0);
            let f0 = smoothed_objective(&forms, &w0, zeta);
            assert!((s.eval(&w0) - f0).abs() <= 1e-9 * (1.0 + f0.abs()));
            for _ in 0..200 {
                let w = random_ball(&mut rng, 4, p);
                assert!(s.eval(&w) <= smoothed_objective(&forms, &w, zeta) + 1e-9);
            }
            let w1 = mm_w_step(&s, p);
            assert!(w1.norm_squared() <= p * (1.0 + 1e-12));
            assert!(s.eval(&w1) >= s.eval(&w0) - 1e-12);
        }
    }

    #[test]
    fn w_step_on_sphere_when_direction_dominates() {
        let s = SurrogateW {
            v_bar: CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            alpha_bar: -0.1,
            c_bar: 0.0,
            center: CVec::zeros(2),
        };
        let w = mm_w_step(&s, 4.0);
        assert!((w[0] - C64::new(2.0, 0.0)).norm() < 1e-15);
        let s = SurrogateW { alpha_bar: -10.0, ..s };
        let w = mm_w_step(&s, 4.0);
        assert!((w[0] - C64::new(0.1, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn phi_surrogate_minorizes_and_touches() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..10 {
            let forms = random_forms(&mut rng, 3, 5);
            let phi0 = random_torus(&mut rng, 5);
            let zeta = 1.0 + 10.0 * rng.gen::<f64>();
            let s = surrogate_phi_params(&forms, &phi0, zeta);
            assert!(s.beta_bar <= 0.0);
            let f0 = smoothed_objective(&forms, &phi0, zeta);
            assert!((s.eval(&phi0) - f0).abs() <= 1e-9 * (1.0 + f0.abs()));
            for _ in 0..200 {
                let phi = random_torus(&mut rng, 5);
                assert!(s.eval(&phi) <= smoothed_objective(&forms, &phi, zeta) + 1e-9);
            }
            let phi1 = mm_phi_step(&s);
            assert!(phi1.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
            let lin = |x: &CVec| s.v_bar.dotc(x).re;
            for _ in 0..100 {
                assert!(lin(&phi1) >= lin(&random_torus(&mut rng, 5)));
            }
        }
    }

    #[test]
    fn phi_step_example() {
        let s = SurrogatePhi {
            v_bar: CVec::from_element(1, C64::new(1.0, 1.0)),
            beta_bar: 0.0,
            c_bar: 0.0,
            center: CVec::from_element(1, C64::new(1.0, 0.0)),
        };
        let phi = mm_phi_step(&s);
        assert!((phi[0] - C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)).norm() < 1e-15);
    }

    #[test]
    fn directional_derivatives_match() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let t = 1e-6;
        for _ in 0..10 {
            let forms = random_forms(&mut rng, 3, 4);
            let zeta = 2.0;
            let w0 = random_ball(&mut rng, 4, 0.5);
            let d = random_cvec(&mut rng, 4, 1.0);
            let s = surrogate_w_params(&forms, &w0, zeta, 2.0);
            let fd = |f: &dyn Fn(&CVec) -> f64| (f(&(&w0 + &d * C64::new(t, 0.0))) - f(&(&w0 - &d * C64::new(t, 0.0)))) / (2.0 * t);
            let a = fd(&|x| s.eval(x));
            let b = fd(&|x| smoothed_objective(&forms, x, zeta));
            assert!((a - b).abs() <= 1e-4 * b.abs().max(1e-3), "{a} {b}");

            let phi0 = random_torus(&mut rng, 4);
            let theta: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() - 0.5).collect();
            let sp = surrogate_phi_params(&forms, &phi0, zeta);
            let path = |tt: f64| CVec::from_fn(4, |m, _| phi0[m] * C64::from_polar(1.0, tt * theta[m]));
            let a = (sp.eval(&path(t)) - sp.eval(&path(-t))) / (2.0 * t);
            let b = (smoothed_objective(&forms, &path(t), zeta) - smoothed_objective(&forms, &path(-t), zeta)) / (2.0 * t);
            assert!((a - b).abs() <= 1e-4 * b.abs().max(1e-3), "{a} {b}");
        }
    }

    #[test]
    fn squarem_identity_and_contraction() {
        let x = CVec::from_element(2, C64::new(1.0, -2.0));
        let obj = |v: &CVec| -v.norm_squared();
        assert_eq!(squarem_accelerate(&x, |v| v.clone(), |v| v.clone(), obj), x);
        let x = CVec::from_element(1, C64::new(1.0, 0.0));
        let out = squarem_accelerate(&x, |v| v * C64::new(0.5, 0.0), |v| v.clone(), obj);
        assert!(out[0].norm() < 0.25);
    }

    #[test]
    fn squarem_never_worse_than_plain_steps() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..20 {
            let forms = random_forms(&mut rng, 2, 3);
            let zeta = 3.0;
            let p = 1.0;
            let w0 = random_ball(&mut rng, 3, p);
            let step = |x: &CVec| mm_w_step(&surrogate_w_params(&forms, x, zeta, p), p);
            let x2 = step(&step(&w0));
            let out = w_block(&forms, &w0, zeta, p);
            assert!(smoothed_objective(&forms, &out, zeta) >= smoothed_objective(&forms, &x2, zeta) - 1e-12);
            assert!(out.norm_squared() <= p * (1.0 + 1e-12));
        }
    }
}
