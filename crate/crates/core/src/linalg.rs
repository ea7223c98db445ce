//! Dense complex linear-algebra helpers shared by the lifting, solver and
//! certificate modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{CMatrix, CVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Tolerance and iteration cap of [`power_norm`].
pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;
/// Above this size spectral norms switch from a dense eigensolver to power
/// iteration.
pub const DENSE_SPECTRAL_LIMIT: usize = 2048;

/// `out = M x`, column-oriented so each column is read contiguously.
pub fn mul_into(m: &CMatrix, x: &[Complex64], out: &mut [Complex64]) {
    let rows = m.nrows();
    debug_assert_eq!(x.len(), m.ncols());
    debug_assert_eq!(out.len(), rows);
    out.fill(ZERO);
    let data = m.as_slice();
    for (c, &xc) in x.iter().enumerate() {
        if xc == ZERO {
            continue;
        }
        let col = &data[c * rows..(c + 1) * rows];
        for (o, &a) in out.iter_mut().zip(col) {
            *o += a * xc;
        }
    }
}

/// `out = M* r`.
pub fn adjoint_mul_into(m: &CMatrix, r: &[Complex64], out: &mut [Complex64]) {
    let rows = m.nrows();
    debug_assert_eq!(r.len(), rows);
    debug_assert_eq!(out.len(), m.ncols());
    let data = m.as_slice();
    for (c, o) in out.iter_mut().enumerate() {
        let col = &data[c * rows..(c + 1) * rows];
        let (mut re, mut im) = (0.0, 0.0);
        for (a, b) in col.iter().zip(r) {
            // conj(a) * b
            re += a.re * b.re + a.im * b.im;
            im += a.re * b.im - a.im * b.re;
        }
        *o = Complex64::new(re, im);
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    // Symmetrize to strip round-off before handing to the solver.
    let sym = DMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Spectral norm of a Hermitian matrix (largest |eigenvalue|).
pub fn hermitian_spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let (values, _) = hermitian_eigen(m);
    values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Largest singular value of `m`.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return 0.0;
    }
    if r.min(c) <= DENSE_SPECTRAL_LIMIT {
        let gram = if r <= c { m * m.adjoint() } else { m.adjoint() * m };
        hermitian_spectral_norm(&gram).sqrt()
    } else {
        power_norm(m, POWER_TOL, POWER_MAX_ITERS)
    }
}

/// Largest singular value by power iteration on `M*M`, started from a fixed
/// deterministic vector.
pub fn power_norm(m: &CMatrix, tol: f64, max_iters: usize) -> f64 {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return 0.0;
    }
    let mut v: Vec<Complex64> = (0..c)
        .map(|i| Complex64::from_polar(1.0, 0.7 * i as f64 + 0.1))
        .collect();
    let mut mv = vec![ZERO; r];
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|z| *z /= norm);
        mul_into(m, &v, &mut mv);
        let next = mv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        adjoint_mul_into(m, &mv, &mut v);
        if (next - estimate).abs() <= tol * next.max(1e-300) {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Cholesky factor of a Hermitian positive definite matrix, retrying once
/// with a relative diagonal jitter of `1e-12`.
pub fn cholesky(m: &CMatrix) -> Result<Cholesky<Complex64, Dyn>> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Ok(ch);
    }
    let scale = (0..m.nrows()).map(|i| m[(i, i)].re.abs()).fold(0.0, f64::max).max(1.0);
    let mut jittered = m.clone();
    for i in 0..m.nrows() {
        jittered[(i, i)] += Complex64::new(1e-12 * scale, 0.0);
    }
    Cholesky::new(jittered).ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))
}

/// Thin SVD with both factors. Uses nalgebra's default convergence
/// threshold; with `eps = f64::EPSILON` its bidiagonal iteration can stop
/// on a wrong factorization.
pub fn svd(m: &CMatrix) -> Result<SVD<Complex64, Dyn, Dyn>> {
    m.clone()
        .try_svd(true, true, 5.0 * f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))
}

/// `M[:, cols]`.
pub fn select_columns(m: &CMatrix, cols: &[usize]) -> CMatrix {
    let rows = m.nrows();
    DMatrix::from_fn(rows, cols.len(), |r, c| m[(r, cols[c])])
}

/// `v[idx]`.
pub fn gather(v: &[Complex64], idx: &[usize]) -> CVector {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

pub fn inf_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn l1_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

pub fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Re⟨a, b⟩ = Re Σ conj(a_i) b_i`.
pub fn re_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Phase `z/|z|`, with `0 ↦ 0`.
pub fn sgn(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        ZERO
    } else {
        z / r
    }
}
