//! Second-order cone programming: generic solver, the precoder subproblem, the
//! penalty convex-concave reflection subproblem, and the alternating SOCP loop.

pub mod ipm;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::fp::{f3_aux_phi, refresh_aux};
use crate::himodel::{EffectiveLinks, UNIT_MODULUS_TOL};
use crate::linalg::{complexify_vector, psd_factor, realify_matrix, CVec, RMat, RVec, C64};
use crate::quadform::{min_value, phi_forms, w_forms, QuadraticForm};
use crate::rate::{BeamState, RateReport};
use crate::scenario::{ChannelSet, SystemConfig};
use crate::trace::{relative_change, RunOptions, RunStatus, RunTrace, TraceRow};

use ipm::{ConeLayout, IpmSettings, IpmStatus};

/// `a x + b` lies in the second-order cone `{(t, y) : ||y|| <= t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub a: RMat,
    pub b: RVec,
}

impl SocConstraint {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `||y|| - t` at `x` (nonpositive when satisfied).
    pub fn residual(&self, x: &RVec) -> f64 {
        let v = &self.a * x + &self.b;
        v.rows(1, v.len() - 1).norm() - v[0]
    }
}

/// Rows `a x + b >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInequalities {
    pub a: RMat,
    pub b: RVec,
}

impl LinearInequalities {
    pub fn empty(var_dim: usize) -> Self {
        Self {
            a: RMat::zeros(0, var_dim),
            b: RVec::zeros(0),
        }
    }
}

/// `min objective^T x` over second-order cone and linear inequality constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub objective: RVec,
    pub cones: Vec<SocConstraint>,
    pub nonneg: LinearInequalities,
    pub var_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    MaxIter,
    Infeasible,
    Unbounded,
    NumericalError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub x: RVec,
    pub objective_value: f64,
    pub status: ConicStatus,
    pub duality_gap: f64,
    pub iterations: usize,
}

impl ConicProblem {
    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Precondition(m));
        if self.objective.len() != self.var_dim {
            return bad(format!("objective has length {}, expected {}", self.objective.len(), self.var_dim));
        }
        for (i, c) in self.cones.iter().enumerate() {
            if c.dim() < 2 || c.a.nrows() != c.dim() || c.a.ncols() != self.var_dim {
                return bad(format!("cone {i} is malformed"));
            }
        }
        if self.nonneg.a.nrows() != self.nonneg.b.len() || self.nonneg.a.ncols() != self.var_dim {
            return bad("linear inequality block is malformed".into());
        }
        Ok(())
    }
}

/// Solve a conic problem with the in-repo interior-point method.
pub fn solve_socp(problem: &ConicProblem) -> Result<ConicSolution> {
    solve_socp_with(problem, &IpmSettings::default())
}

pub fn solve_socp_with(problem: &ConicProblem, settings: &IpmSettings) -> Result<ConicSolution> {
    problem.check()?;
    let layout = ConeLayout {
        nonneg: problem.nonneg.b.len(),
        soc: problem.cones.iter().map(|c| c.dim()).collect(),
    };
    let m = layout.rows();
    let n = problem.var_dim;
    let mut g = RMat::zeros(m, n);
    let mut h = RVec::zeros(m);
    let l = layout.nonneg;
    g.rows_mut(0, l).copy_from(&(-&problem.nonneg.a));
    h.rows_mut(0, l).copy_from(&problem.nonneg.b);
    let mut off = l;
    for c in &problem.cones {
        let d = c.dim();
        g.rows_mut(off, d).copy_from(&(-&c.a));
        h.rows_mut(off, d).copy_from(&c.b);
        off += d;
    }
    let r = ipm::solve(&problem.objective, &g, &h, &layout, settings);
    let status = match r.status {
        IpmStatus::Optimal => ConicStatus::Optimal,
        IpmStatus::MaxIter => ConicStatus::MaxIter,
        IpmStatus::Infeasible => ConicStatus::Infeasible,
        IpmStatus::Unbounded => ConicStatus::Unbounded,
        IpmStatus::NumericalError => ConicStatus::NumericalError,
    };
    Ok(ConicSolution {
        objective_value: problem.objective.dot(&r.x),
        x: r.x,
        status,
        duality_gap: r.gap,
        iterations: r.iterations,
    })
}

/// Cone encoding `form(x) >= delta` for complex `x` stored as `[Re x; Im x]` at
/// columns `0..2 dim` and `delta` at column `delta_col`.
///
/// Uses `||[2 F x; 1 - t]|| <= 1 + t` with `t = 2 Re{b^H x} + c - delta` and `C = F^H F`.
pub fn quadratic_cone(form: &QuadraticForm, var_dim: usize, delta_col: usize) -> Result<SocConstraint> {
    let dim = form.dim();
    let f = psd_factor(&form.c_mat, -1e-10)
        .ok_or_else(|| Error::Precondition("quadratic form matrix is not positive semidefinite".into()))?;
    let fr = realify_matrix(&f);
    let r = fr.nrows();
    let mut a = RMat::zeros(r + 2, var_dim);
    let mut b = RVec::zeros(r + 2);
    for j in 0..dim {
        let (re, im) = (form.b_vec[j].re, form.b_vec[j].im);
        a[(0, j)] = 2.0 * re;
        a[(0, j + dim)] = 2.0 * im;
        a[(r + 1, j)] = -2.0 * re;
        a[(r + 1, j + dim)] = -2.0 * im;
    }
    a[(0, delta_col)] = -1.0;
    a[(r + 1, delta_col)] = 1.0;
    b[0] = 1.0 + form.c_scalar;
    b[r + 1] = 1.0 - form.c_scalar;
    a.view_mut((1, 0), (r, 2 * dim)).copy_from(&(fr * 2.0));
    Ok(SocConstraint { a, b })
}

/// Result of a block subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemOutcome {
    pub x: CVec,
    pub warning: Option<String>,
    pub solver_iterations: usize,
}

/// Maximize `min_k form_k(w)` subject to `||w||^2 <= p_max`.
///
/// Never returns a point worse than `incumbent`.
pub fn solve_w_subproblem(forms: &[QuadraticForm], p_max: f64, incumbent: &CVec) -> Result<SubproblemOutcome> {
    let n = incumbent.len();
    let var_dim = 2 * n + 1;
    let delta = 2 * n;
    let mut objective = RVec::zeros(var_dim);
    objective[delta] = -1.0;
    let mut cones = Vec::with_capacity(forms.len() + 1);
    let mut power = SocConstraint {
        a: RMat::zeros(2 * n + 1, var_dim),
        b: RVec::zeros(2 * n + 1),
    };
    power.b[0] = p_max.sqrt();
    for j in 0..2 * n {
        power.a[(j + 1, j)] = 1.0;
    }
    cones.push(power);
    for f in forms {
        cones.push(quadratic_cone(f, var_dim, delta)?);
    }
    let problem = ConicProblem {
        objective,
        cones,
        nonneg: LinearInequalities::empty(var_dim),
        var_dim,
    };
    let sol = solve_socp(&problem)?;
    let keep = |warning: Option<String>| SubproblemOutcome {
        x: incumbent.clone(),
        warning,
        solver_iterations: sol.iterations,
    };
    if sol.status != ConicStatus::Optimal {
        return Ok(keep(Some(format!("precoder subproblem ended with status {:?}", sol.status))));
    }
    let mut w = complexify_vector(&sol.x.as_slice()[..2 * n]);
    let p = w.norm_squared();
    if p > p_max {
        w *= C64::new((p_max / p).sqrt(), 0.0);
    }
    if min_value(forms, &w) < min_value(forms, incumbent) {
        return Ok(keep(None));
    }
    Ok(SubproblemOutcome {
        x: w,
        warning: None,
        solver_iterations: sol.iterations,
    })
}

/// Penalty convex-concave procedure parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcpParams {
    pub lambda_init: f64,
    pub gamma: f64,
    pub lambda_max: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub t_max: usize,
}

impl Default for CcpParams {
    fn default() -> Self {
        Self {
            lambda_init: 1e-3,
            gamma: 5.0,
            lambda_max: 1e4,
            eps1: 1e-4,
            eps2: 1e-4,
            t_max: 30,
        }
    }
}

impl CcpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0
            && self.lambda_init > 0.0
            && self.lambda_max >= self.lambda_init
            && self.eps1 > 0.0
            && self.eps2 > 0.0
            && self.t_max >= 1)
        {
            return Err(Error::Parameter(
                "penalty parameters need gamma > 1, lambda_max >= lambda_init > 0, positive tolerances and t_max >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of the penalty procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct CcpOutcome {
    pub phi: CVec,
    pub converged: bool,
    pub iterations: usize,
    /// `||b||_1` of the last solved iterate.
    pub slack: f64,
    pub warning: Option<String>,
}

fn normalize_phases(phi: &CVec, fallback: &CVec) -> CVec {
    CVec::from_fn(phi.len(), |m, _| {
        let r = phi[m].norm();
        if r > 0.0 && r.is_finite() {
            phi[m] / r
        } else {
            fallback[m] / fallback[m].norm()
        }
    })
}

fn ccp_problem(forms: &[QuadraticForm], point: &CVec, lambda: f64) -> Result<ConicProblem> {
    let m = point.len();
    let var_dim = 4 * m + 1;
    let delta = 2 * m;
    let slack = |i: usize| 2 * m + 1 + i;
    let mut objective = RVec::zeros(var_dim);
    objective[delta] = -1.0;
    for i in 0..2 * m {
        objective[slack(i)] = lambda;
    }
    let mut cones = Vec::with_capacity(forms.len() + m);
    for f in forms {
        cones.push(quadratic_cone(f, var_dim, delta)?);
    }
    // |phi_m|^2 <= 1 + b_{M+m}  as  ||[2 phi_m; -b]|| <= 2 + b.
    for i in 0..m {
        let mut a = RMat::zeros(4, var_dim);
        let mut b = RVec::zeros(4);
        a[(0, slack(m + i))] = 1.0;
        b[0] = 2.0;
        a[(1, i)] = 2.0;
        a[(2, i + m)] = 2.0;
        a[(3, slack(m + i))] = -1.0;
        cones.push(SocConstraint { a, b });
    }
    // 2 Re(phi^* phi_t) - |phi_t|^2 - 1 + b_m >= 0 and b >= 0.
    let mut a = RMat::zeros(3 * m, var_dim);
    let mut b = RVec::zeros(3 * m);
    for i in 0..m {
        a[(i, i)] = 2.0 * point[i].re;
        a[(i, i + m)] = 2.0 * point[i].im;
        a[(i, slack(i))] = 1.0;
        b[i] = -point[i].norm_sqr() - 1.0;
    }
    for i in 0..2 * m {
        a[(m + i, slack(i))] = 1.0;
    }
    Ok(ConicProblem {
        objective,
        cones,
        nonneg: LinearInequalities { a, b },
        var_dim,
    })
}

/// Maximize `min_k form_k(phi)` over unit-modulus `phi` by the penalty convex-concave procedure.
///
/// The returned vector has exact unit modulus and is never worse than `phi_init`.
pub fn solve_phi_subproblem_ccp(forms: &[QuadraticForm], phi_init: &CVec, params: &CcpParams) -> Result<CcpOutcome> {
    for (m, z) in phi_init.iter().enumerate() {
        if (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL {
            return Err(Error::Precondition(format!("initial reflection coefficient {m} is not unit modulus")));
        }
    }
    let m = phi_init.len();
    let mut best = phi_init.clone();
    let mut best_val = min_value(forms, phi_init);
    let mut point = phi_init.clone();
    let mut lambda = params.lambda_init;
    let mut out = CcpOutcome {
        phi: best.clone(),
        converged: false,
        iterations: 0,
        slack: f64::INFINITY,
        warning: None,
    };
    for t in 0..params.t_max {
        let sol = solve_socp(&ccp_problem(forms, &point, lambda)?)?;
        out.iterations = t + 1;
        if !matches!(sol.status, ConicStatus::Optimal | ConicStatus::MaxIter) || sol.x.iter().any(|v| !v.is_finite()) {
            out.warning = Some(format!("reflection subproblem ended with status {:?}", sol.status));
            break;
        }
        let next = complexify_vector(&sol.x.as_slice()[..2 * m]);
        let slack: f64 = sol.x.as_slice()[2 * m + 1..].iter().map(|v| v.abs()).sum();
        let unit = normalize_phases(&next, &point);
        let val = min_value(forms, &unit);
        if val > best_val {
            best_val = val;
            best = unit;
        }
        let moved: f64 = (&next - &point).iter().map(|z| z.norm()).sum();
        point = next;
        out.slack = slack;
        lambda = (params.gamma * lambda).min(params.lambda_max);
        if moved <= params.eps1 && slack <= params.eps2 {
            out.converged = true;
            break;
        }
    }
    if !out.converged && out.warning.is_none() {
        out.warning = Some(format!("penalty procedure stopped after {} iterations with slack {:.3e}", out.iterations, out.slack));
    }
    out.phi = best;
    Ok(out)
}

/// Alternating optimization with an SOCP precoder step and a penalty CCP reflection step.
pub fn bcd_socp(config: &SystemConfig, channels: &ChannelSet, init: &BeamState) -> Result<(BeamState, RunTrace)> {
    bcd_socp_with(config, channels, init, &RunOptions::default())
}

pub fn bcd_socp_with(
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
    let links0 = EffectiveLinks::new(state.phi(), channels, config.phase_noise)?;
    let mut prev = RateReport::from_links(&links0, state.w_mat(), config).weighted_min(&config.weights, false).0;
    let update_phi = !options.freeze_phi && channels.m_ris() > 0;
    for n in 1..=config.mm.max_iter {
        let links = EffectiveLinks::new(state.phi(), channels, config.phase_noise)?;
        let mut aux = refresh_aux(&links, state.w_mat(), config);
        let wf = w_forms(&links, &aux, config);
        let w_out = solve_w_subproblem(&wf, config.p_max, state.w_vec())?;
        if let Some(msg) = w_out.warning {
            trace.warnings.push(format!("iteration {n}: {msg}"));
        }
        state = state.with_w_vec(w_out.x);
        let mut bound = min_value(&wf, state.w_vec());
        if update_phi {
            let (p, q) = f3_aux_phi(&links, state.w_mat(), config);
            aux.p_phi = p;
            aux.q_phi = q;
            let pf = phi_forms(state.w_mat(), &aux, channels, config);
            let ccp = solve_phi_subproblem_ccp(&pf, state.phi(), &config.ccp)?;
            if let Some(msg) = ccp.warning {
                trace.warnings.push(format!("iteration {n}: {msg}"));
            }
            state = state.with_phi(ccp.phi);
            bound = min_value(&pf, state.phi());
        }
        if !bound.is_finite() {
            return Err(Error::Numerical {
                step: "socp bound".into(),
                iteration: n,
                detail: format!("bound objective {bound}"),
            });
        }
        let eval_links = EffectiveLinks::new(state.phi(), channels, eval_cfg.phase_noise)?;
        let true_wmsr = RateReport::from_links(&eval_links, state.w_mat(), eval_cfg)
            .weighted_min(&eval_cfg.weights, true)
            .0;
        trace.rows.push(TraceRow {
            iteration: n,
            bound_objective: bound,
            true_wmsr,
            zeta: None,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            blocks: None,
        });
        trace.iterations = n;
        if relative_change(bound, prev) <= config.mm.tolerance {
            trace.status = RunStatus::Converged;
            break;
        }
        prev = bound;
    }
    trace.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((state, trace))
}
