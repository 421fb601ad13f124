//! Primal-dual interior-point method for small dense second-order cone programs.
//!
//! Solves `min c^T x  s.t.  G x + s = h,  s in K` where `K` is a product of a
//! nonnegative orthant and second-order cones, using the homogeneous
//! self-dual embedding, Nesterov-Todd scaling and Mehrotra predictor-corrector
//! steps. Linear systems are reduced to normal equations and solved by Cholesky
//! with iterative refinement.

use nalgebra::Cholesky;

use crate::linalg::{RMat, RVec};

/// Cone layout: `nonneg` orthant rows first, then one block per second-order cone.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeLayout {
    pub nonneg: usize,
    pub soc: Vec<usize>,
}

impl ConeLayout {
    pub fn rows(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    fn blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut off = self.nonneg;
        self.soc.iter().map(move |&d| {
            let b = (off, d);
            off += d;
            b
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    pub max_iter: usize,
    pub feastol: f64,
    pub abstol: f64,
    pub reltol: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            feastol: 1e-8,
            abstol: 1e-8,
            reltol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    MaxIter,
    Infeasible,
    Unbounded,
    NumericalError,
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub x: RVec,
    pub s: RVec,
    pub z: RVec,
    pub status: IpmStatus,
    pub gap: f64,
    pub pres: f64,
    pub dres: f64,
    pub iterations: usize,
}

fn soc_residual(v: &[f64]) -> f64 {
    let tail: f64 = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    tail - v[0]
}

/// Largest violation of cone membership (negative means strictly interior).
fn max_violation(v: &RVec, cones: &ConeLayout) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..cones.nonneg {
        worst = worst.max(-v[i]);
    }
    for (off, d) in cones.blocks() {
        worst = worst.max(soc_residual(&v.as_slice()[off..off + d]));
    }
    worst
}

fn add_identity(v: &mut RVec, cones: &ConeLayout, t: f64) {
    for i in 0..cones.nonneg {
        v[i] += t;
    }
    for (off, _) in cones.blocks() {
        v[off] += t;
    }
}

fn identity(cones: &ConeLayout) -> RVec {
    let mut e = RVec::zeros(cones.rows());
    add_identity(&mut e, cones, 1.0);
    e
}

/// Jordan product `u o v`.
fn jordan(u: &RVec, v: &RVec, cones: &ConeLayout) -> RVec {
    let mut r = RVec::zeros(u.len());
    for i in 0..cones.nonneg {
        r[i] = u[i] * v[i];
    }
    for (off, d) in cones.blocks() {
        let uu = &u.as_slice()[off..off + d];
        let vv = &v.as_slice()[off..off + d];
        r[off] = uu.iter().zip(vv).map(|(a, b)| a * b).sum();
        for j in 1..d {
            r[off + j] = uu[0] * vv[j] + vv[0] * uu[j];
        }
    }
    r
}

/// Solve `lambda o y = x` for `y`.
fn jordan_div(lambda: &RVec, x: &RVec, cones: &ConeLayout) -> RVec {
    let mut y = RVec::zeros(x.len());
    for i in 0..cones.nonneg {
        y[i] = x[i] / lambda[i];
    }
    for (off, d) in cones.blocks() {
        let l = &lambda.as_slice()[off..off + d];
        let xx = &x.as_slice()[off..off + d];
        let tail: f64 = l[1..].iter().map(|a| a * a).sum();
        let det = l[0] * l[0] - tail;
        let dot: f64 = l[1..].iter().zip(&xx[1..]).map(|(a, b)| a * b).sum();
        let y0 = (l[0] * xx[0] - dot) / det;
        y[off] = y0;
        for j in 1..d {
            y[off + j] = (xx[j] - y0 * l[j]) / l[0];
        }
    }
    y
}

/// Largest `alpha` with `v + alpha dv` in the cone (may be infinite).
fn max_step(v: &RVec, dv: &RVec, cones: &ConeLayout) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in 0..cones.nonneg {
        if dv[i] < 0.0 {
            alpha = alpha.min(-v[i] / dv[i]);
        }
    }
    for (off, d) in cones.blocks() {
        let x = &v.as_slice()[off..off + d];
        let dx = &dv.as_slice()[off..off + d];
        let a = dx[0] * dx[0] - dx[1..].iter().map(|t| t * t).sum::<f64>();
        let b = x[0] * dx[0] - x[1..].iter().zip(&dx[1..]).map(|(p, q)| p * q).sum::<f64>();
        let c = (x[0] * x[0] - x[1..].iter().map(|t| t * t).sum::<f64>()).max(0.0);
        let disc = b * b - a * c;
        if a > 0.0 && (b >= 0.0 || disc < 0.0) {
            continue;
        }
        let denom = -b + disc.max(0.0).sqrt();
        if denom > 0.0 {
            alpha = alpha.min(c / denom);
        }
    }
    alpha
}

#[derive(Debug, Clone)]
struct SocScaling {
    eta: f64,
    w: RVec,
}

/// Nesterov-Todd scaling `W` with `W z = W^{-1} s`.
#[derive(Debug, Clone)]
struct Scaling {
    lp: RVec,
    soc: Vec<SocScaling>,
}

impl Scaling {
    fn new(s: &RVec, z: &RVec, cones: &ConeLayout) -> Option<Self> {
        let lp = RVec::from_fn(cones.nonneg, |i, _| (s[i] / z[i]).sqrt());
        let mut soc = Vec::with_capacity(cones.soc.len());
        for (off, d) in cones.blocks() {
            let ss = &s.as_slice()[off..off + d];
            let zz = &z.as_slice()[off..off + d];
            let sjs = ss[0] * ss[0] - ss[1..].iter().map(|t| t * t).sum::<f64>();
            let zjz = zz[0] * zz[0] - zz[1..].iter().map(|t| t * t).sum::<f64>();
            if !(sjs > 0.0 && zjz > 0.0) {
                return None;
            }
            let (rs, rz) = (sjs.sqrt(), zjz.sqrt());
            let dot: f64 = ss.iter().zip(zz).map(|(a, b)| a * b).sum::<f64>() / (rs * rz);
            let gamma = ((1.0 + dot) / 2.0).sqrt();
            let mut w = RVec::zeros(d);
            w[0] = (ss[0] / rs + zz[0] / rz) / (2.0 * gamma);
            for j in 1..d {
                w[j] = (ss[j] / rs - zz[j] / rz) / (2.0 * gamma);
            }
            soc.push(SocScaling {
                eta: (sjs / zjz).powf(0.25),
                w,
            });
        }
        if lp.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self { lp, soc })
    }

    fn apply(&self, x: &RVec, cones: &ConeLayout, inverse: bool) -> RVec {
        let mut y = RVec::zeros(x.len());
        for i in 0..cones.nonneg {
            y[i] = if inverse { x[i] / self.lp[i] } else { x[i] * self.lp[i] };
        }
        for ((off, d), sc) in cones.blocks().zip(&self.soc) {
            let xx = &x.as_slice()[off..off + d];
            let w = &sc.w;
            let sign = if inverse { -1.0 } else { 1.0 };
            let w1x1: f64 = (1..d).map(|j| w[j] * xx[j]).sum();
            let scale = if inverse { 1.0 / sc.eta } else { sc.eta };
            y[off] = scale * (w[0] * xx[0] + sign * w1x1);
            let coef = sign * xx[0] + w1x1 / (1.0 + w[0]);
            for j in 1..d {
                y[off + j] = scale * (xx[j] + coef * w[j]);
            }
        }
        y
    }

    fn apply_cols(&self, g: &RMat, cones: &ConeLayout, inverse: bool) -> RMat {
        let mut out = RMat::zeros(g.nrows(), g.ncols());
        for j in 0..g.ncols() {
            let col = g.column(j).into_owned();
            out.set_column(j, &self.apply(&col, cones, inverse));
        }
        out
    }
}

struct KktSolver<'a> {
    g: &'a RMat,
    gs: RMat,
    chol: Cholesky<f64, nalgebra::Dyn>,
    scaling: Scaling,
    cones: &'a ConeLayout,
}

impl<'a> KktSolver<'a> {
    fn new(g: &'a RMat, scaling: Scaling, cones: &'a ConeLayout) -> Option<Self> {
        let gs = scaling.apply_cols(g, cones, true);
        let nmat = gs.transpose() * &gs;
        let n = nmat.nrows();
        let maxd = (0..n).map(|i| nmat[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
        let mut reg = 1e-13 * maxd;
        for _ in 0..8 {
            let mut m = nmat.clone();
            for i in 0..n {
                m[(i, i)] += reg;
            }
            if let Some(chol) = m.cholesky() {
                return Some(Self {
                    g,
                    gs,
                    chol,
                    scaling,
                    cones,
                });
            }
            reg *= 100.0;
        }
        None
    }

    /// Solve `G^T z = r1`, `G x - W^2 z = r2`.
    fn solve_once(&self, r1: &RVec, r2: &RVec) -> (RVec, RVec) {
        let winv_r2 = self.scaling.apply(r2, self.cones, true);
        let rhs = r1 + self.gs.transpose() * &winv_r2;
        let x = self.chol.solve(&rhs);
        let t = &self.gs * &x - winv_r2;
        let z = self.scaling.apply(&t, self.cones, true);
        (x, z)
    }

    fn solve(&self, r1: &RVec, r2: &RVec) -> (RVec, RVec) {
        let (mut x, mut z) = self.solve_once(r1, r2);
        for _ in 0..3 {
            let e1 = r1 - self.g.transpose() * &z;
            let wz = self.scaling.apply(&self.scaling.apply(&z, self.cones, false), self.cones, false);
            let e2 = r2 - (self.g * &x - wz);
            let err = e1.amax().max(e2.amax());
            if err <= 1e-15 * (1.0 + r1.amax().max(r2.amax())) {
                break;
            }
            let (dx, dz) = self.solve_once(&e1, &e2);
            x += dx;
            z += dz;
        }
        (x, z)
    }
}

fn initial_point(g: &RMat, h: &RVec, c: &RVec, cones: &ConeLayout) -> Option<(RVec, RVec, RVec)> {
    let n = g.ncols();
    let mut nmat = g.transpose() * g;
    let maxd = (0..n).map(|i| nmat[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
    for i in 0..n {
        nmat[(i, i)] += 1e-12 * maxd;
    }
    let chol = nmat.cholesky()?;
    let x = chol.solve(&(g.transpose() * h));
    let mut s = h - g * &x;
    let xd = chol.solve(&(-c));
    let mut z = g * xd;
    let ap = max_violation(&s, cones);
    if ap >= -1e-8 {
        add_identity(&mut s, cones, 1.0 + ap.max(0.0));
    }
    let ad = max_violation(&z, cones);
    if ad >= -1e-8 {
        add_identity(&mut z, cones, 1.0 + ad.max(0.0));
    }
    Some((x, s, z))
}

/// Solve `min c^T x` subject to `G x + s = h`, `s` in the cone.
pub fn solve(c: &RVec, g: &RMat, h: &RVec, cones: &ConeLayout, settings: &IpmSettings) -> IpmResult {
    let n = c.len();
    let m = h.len();
    let degree = cones.degree() as f64;
    let fail = |status| IpmResult {
        x: RVec::zeros(n),
        s: RVec::zeros(m),
        z: RVec::zeros(m),
        status,
        gap: f64::INFINITY,
        pres: f64::INFINITY,
        dres: f64::INFINITY,
        iterations: 0,
    };
    let Some((mut x, mut s, mut z)) = initial_point(g, h, c, cones) else {
        return fail(IpmStatus::NumericalError);
    };
    let (mut tau, mut kappa) = (1.0f64, 1.0f64);
    let hnorm = h.norm().max(1.0);
    let cnorm = c.norm().max(1.0);
    let e = identity(cones);
    let mut best: Option<IpmResult> = None;

    let mut iter = 0;
    loop {
        // Residuals of the embedding.
        let rx = g.transpose() * &z + c * tau;
        let rz = h * tau - g * &x - &s;
        let rtau = -c.dot(&x) - h.dot(&z) - kappa;
        let pres = (g * &x + &s - h * tau).norm() / tau / hnorm;
        let dres = rx.norm() / tau / cnorm;
        let pcost = c.dot(&x) / tau;
        let dcost = -h.dot(&z) / tau;
        let gap = s.dot(&z) / (tau * tau);
        let snapshot = IpmResult {
            x: &x / tau,
            s: &s / tau,
            z: &z / tau,
            status: IpmStatus::MaxIter,
            gap,
            pres,
            dres,
            iterations: iter,
        };
        let relgap = gap / pcost.abs().max(dcost.abs()).max(1e-300);
        if pres <= settings.feastol && dres <= settings.feastol && (gap <= settings.abstol || relgap <= settings.reltol) {
            return IpmResult {
                status: IpmStatus::Optimal,
                ..snapshot
            };
        }
        let hz = h.dot(&z);
        let cx = c.dot(&x);
        if tau < kappa {
            if hz < 0.0 && (g.transpose() * &z).norm() <= settings.feastol * (-hz) {
                return IpmResult {
                    status: IpmStatus::Infeasible,
                    ..snapshot
                };
            }
            if cx < 0.0 && (g * &x + &s).norm() <= settings.feastol * (-cx) {
                return IpmResult {
                    status: IpmStatus::Unbounded,
                    ..snapshot
                };
            }
        }
        let score = pres.max(dres).max(gap / (1.0 + pcost.abs()));
        let better = match &best {
            None => true,
            Some(b) => score < b.pres.max(b.dres).max(b.gap / (1.0 + (c.dot(&b.x)).abs())),
        };
        if better && pres.is_finite() && dres.is_finite() && gap.is_finite() {
            best = Some(snapshot.clone());
        }
        if iter >= settings.max_iter {
            return best.unwrap_or(snapshot);
        }
        iter += 1;

        let Some(scaling) = Scaling::new(&s, &z, cones) else {
            return best.unwrap_or(snapshot);
        };
        let lambda = scaling.apply(&z, cones, false);
        let lsq = jordan(&lambda, &lambda, cones);
        let Some(kkt) = KktSolver::new(g, scaling, cones) else {
            return best.unwrap_or(snapshot);
        };
        let (x1, z1) = kkt.solve(&(-c), h);
        let denom = c.dot(&x1) + h.dot(&z1) - kappa / tau;

        let direction = |ds_rhs: &RVec, dk_rhs: f64, eta: f64| {
            let div = jordan_div(&lambda, ds_rhs, cones);
            let wt_div = kkt.scaling.apply(&div, cones, false);
            let r1 = -&rx * eta;
            let r2 = &rz * eta - &wt_div;
            let (x2, z2) = kkt.solve(&r1, &r2);
            let dtau = (eta * rtau - c.dot(&x2) - h.dot(&z2) - dk_rhs / tau) / denom;
            let dx = x2 + &x1 * dtau;
            let dz = z2 + &z1 * dtau;
            let wdz = kkt.scaling.apply(&dz, cones, false);
            let ds = kkt.scaling.apply(&(div - &wdz), cones, false);
            let dkappa = (dk_rhs - kappa * dtau) / tau;
            (dx, ds, dz, dtau, dkappa)
        };
        let step_len = |ds: &RVec, dz: &RVec, dtau: f64, dkappa: f64| {
            let mut a = max_step(&s, ds, cones).min(max_step(&z, dz, cones));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        let mu = (s.dot(&z) + tau * kappa) / (degree + 1.0);
        // Predictor.
        let (_, ds_a, dz_a, dtau_a, dkappa_a) = direction(&(-&lsq), -tau * kappa, 1.0);
        let alpha_a = step_len(&ds_a, &dz_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3).clamp(0.0, 1.0);
        // Corrector.
        let ws_a = kkt.scaling.apply(&ds_a, cones, true);
        let wz_a = kkt.scaling.apply(&dz_a, cones, false);
        let ds_rhs = -&lsq - jordan(&ws_a, &wz_a, cones) + &e * (sigma * mu);
        let dk_rhs = -tau * kappa - dtau_a * dkappa_a + sigma * mu;
        let (dx, ds, dz, dtau, dkappa) = direction(&ds_rhs, dk_rhs, 1.0 - sigma);
        let alpha = (0.99 * step_len(&ds, &dz, dtau, dkappa)).min(1.0);
        if !(alpha > 0.0) || !alpha.is_finite() {
            return best.unwrap_or(snapshot);
        }
        x += dx * alpha;
        s += ds * alpha;
        z += dz * alpha;
        tau += dtau * alpha;
        kappa += dkappa * alpha;
        if !(tau > 0.0 && kappa >= 0.0) || x.iter().any(|v| !v.is_finite()) {
            return best.unwrap_or(snapshot);
        }
    }
}
