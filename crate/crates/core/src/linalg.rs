//! Small dense linear-algebra helpers shared by the optimizers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub fn cx(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `x^H y`.
pub fn inner(x: &CVec, y: &CVec) -> C64 {
    x.dotc(y)
}

pub fn norm_sq(x: &CVec) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// `x^H A x` for Hermitian `A`, real part only.
pub fn herm_form(a: &CMat, x: &CVec) -> f64 {
    x.dotc(&(a * x)).re
}

/// Average `A` with its conjugate transpose.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Factor a Hermitian PSD matrix as `C = F^H F`.
///
/// Eigenvalues below `clip` are treated as an error of the caller; eigenvalues in
/// `[clip, 0]` are set to zero. Rows belonging to zero eigenvalues are dropped.
pub fn psd_factor(c: &CMat, clip: f64) -> Option<CMat> {
    let n = c.nrows();
    if n == 0 {
        return Some(CMat::zeros(0, 0));
    }
    let eig = hermitian_part(c).symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut rows = Vec::new();
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < clip * scale {
            return None;
        }
        if lam > 1e-14 * scale {
            rows.push((i, lam.sqrt()));
        }
    }
    let mut f = CMat::zeros(rows.len(), n);
    for (r, &(i, s)) in rows.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        for j in 0..n {
            f[(r, j)] = v[j].conj() * s;
        }
    }
    Some(f)
}

/// Real representation `[[Re A, -Im A], [Im A, Re A]]`.
pub fn realify_matrix(a: &CMat) -> RMat {
    let (m, n) = a.shape();
    let mut r = RMat::zeros(2 * m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            let z = a[(i, j)];
            r[(i, j)] = z.re;
            r[(i, j + n)] = -z.im;
            r[(i + m, j)] = z.im;
            r[(i + m, j + n)] = z.re;
        }
    }
    r
}

/// Stack `[Re x; Im x]`.
pub fn realify_vector(x: &CVec) -> RVec {
    let n = x.len();
    RVec::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

/// Inverse of [`realify_vector`].
pub fn complexify_vector(x: &[f64]) -> CVec {
    let n = x.len() / 2;
    CVec::from_fn(n, |i, _| C64::new(x[i], x[i + n]))
}

/// Spectral radius of a Hermitian matrix by power iteration.
pub fn power_iteration(a: &CMat, rng: &mut ChaCha20Rng, tol: f64, max_iter: usize) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let h = hermitian_part(a);
    let mut x = CVec::from_fn(n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let nx = x.norm();
    if nx == 0.0 {
        x[0] = C64::new(1.0, 0.0);
    } else {
        x /= C64::new(nx, 0.0);
    }
    let mut est = 0.0;
    for _ in 0..max_iter {
        let y = &h * &x;
        let ny = y.norm();
        if ny == 0.0 {
            return 0.0;
        }
        let next = ny;
        x = y / C64::new(ny, 0.0);
        if (next - est).abs() <= tol * next.max(1e-300) {
            return next;
        }
        est = next;
    }
    est
}

/// `diag(A)` as a real vector (imaginary parts dropped).
pub fn real_diagonal(a: &CMat) -> RVec {
    RVec::from_fn(a.nrows(), |i, _| a[(i, i)].re)
}

/// Diagonal matrix from a real vector.
pub fn diag_real(d: &RVec) -> CMat {
    let n = d.len();
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(d[i], 0.0);
    }
    m
}

/// Column-stacking vectorization.
pub fn vec_columns(a: &CMat) -> CVec {
    let (m, n) = a.shape();
    CVec::from_fn(m * n, |i, _| a[(i % m, i / m)])
}

/// Inverse of [`vec_columns`].
pub fn unvec_columns(v: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |i, j| v[j * rows + i])
}
