//! The lifted linear operator.
//!
//! Measurements of `X = h xᵀ` are linear: `𝒜(X)_l = b_l* X a_l`, where `b_l*`
//! is row `l` of `B` and `a_lᵀ` row `l` of `A`. With `vec` the column-stacking
//! of the `k×N` matrix `X`, `𝒜(X) = Φ vec(X)` and column `j·k + i` of `Φ` is the
//! elementwise product `b̃_i ∘ ã_j` of column `i` of `B` and column `j` of `A`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::SupportSet;
use crate::{CMatrix, CVector};

/// Default cap on the number of entries of an explicit `Φ` (2²⁷).
pub const DEFAULT_ENTRY_CAP: usize = 1 << 27;

/// Explicit `L×kN` matrix form of `𝒜`.
#[derive(Debug, Clone)]
pub struct LiftedOperator {
    phi: CMatrix,
    subspace_dim: usize,
    signal_len: usize,
}

impl LiftedOperator {
    /// Builds `Φ` from `A` (L×N) and `B` (L×k) under [`DEFAULT_ENTRY_CAP`].
    pub fn build(a: &CMatrix, b: &CMatrix) -> Result<Self> {
        Self::build_with_cap(a, b, DEFAULT_ENTRY_CAP)
    }

    pub fn build_with_cap(a: &CMatrix, b: &CMatrix, cap: usize) -> Result<Self> {
        let (l, n_sig) = a.shape();
        let k = b.ncols();
        if b.nrows() != l {
            return Err(Error::shape(format!("B with {l} rows"), format!("{} rows", b.nrows())));
        }
        if l == 0 || n_sig == 0 || k == 0 {
            return Err(Error::InvalidDimensions("empty A or B".into()));
        }
        let entries = l.saturating_mul(k).saturating_mul(n_sig);
        if entries > cap {
            return Err(Error::TooLarge { entries, cap });
        }
        let phi = DMatrix::from_fn(l, k * n_sig, |row, col| b[(row, col % k)] * a[(row, col / k)]);
        Ok(LiftedOperator {
            phi,
            subspace_dim: k,
            signal_len: n_sig,
        })
    }

    /// Wraps an explicit matrix, treated as having `k = 1`.
    pub fn from_matrix(phi: CMatrix) -> Self {
        let n = phi.ncols();
        LiftedOperator {
            phi,
            subspace_dim: 1,
            signal_len: n,
        }
    }

    /// Wraps an explicit `L×kN` matrix whose columns follow the lifted order.
    pub fn from_matrix_with_k(phi: CMatrix, k: usize) -> Result<Self> {
        if k == 0 || !phi.ncols().is_multiple_of(k) {
            return Err(Error::InvalidDimensions(format!("{} columns do not split into groups of {k}", phi.ncols())));
        }
        let n = phi.ncols() / k;
        Ok(LiftedOperator {
            phi,
            subspace_dim: k,
            signal_len: n,
        })
    }

    pub fn phi(&self) -> &CMatrix {
        &self.phi
    }

    pub fn measurements(&self) -> usize {
        self.phi.nrows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.subspace_dim
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    /// `kN`.
    pub fn lifted_len(&self) -> usize {
        self.phi.ncols()
    }

    /// Column of `Φ` holding entry `(i, j)` of `X`.
    pub fn column_index(&self, i: usize, j: usize) -> usize {
        j * self.subspace_dim + i
    }

    /// `Φ v`.
    pub fn apply(&self, v: &[Complex64]) -> CVector {
        let mut out = CVector::zeros(self.measurements());
        linalg::mul_into(&self.phi, v, out.as_mut_slice());
        out
    }

    /// `Φ* u`.
    pub fn adjoint(&self, u: &[Complex64]) -> CVector {
        let mut out = CVector::zeros(self.lifted_len());
        linalg::adjoint_mul_into(&self.phi, u, out.as_mut_slice());
        out
    }

    /// `Φ Φ*` (L×L).
    pub fn row_gram(&self) -> CMatrix {
        &self.phi * self.phi.adjoint()
    }

    /// Real-variable form `[Re Φ; Im Φ]` (`2L×kN`, zero imaginary part).
    /// Together with [`realify_measurements`] it has the same real solutions
    /// as `Φv = y`, and `‖Φv − y‖` is preserved for real `v`.
    pub fn realified(&self) -> LiftedOperator {
        let l = self.measurements();
        let phi = DMatrix::from_fn(2 * l, self.lifted_len(), |r, c| {
            let z = self.phi[(r % l, c)];
            Complex64::new(if r < l { z.re } else { z.im }, 0.0)
        });
        LiftedOperator {
            phi,
            subspace_dim: self.subspace_dim,
            signal_len: self.signal_len,
        }
    }

    /// Reshapes a `kN` vector into the `k×N` matrix it stacks.
    pub fn unvec(&self, v: &[Complex64]) -> CMatrix {
        DMatrix::from_column_slice(self.subspace_dim, self.signal_len, v)
    }

    /// `Φ_Ω`: the columns `{(i, j) : j ∈ Ω_x}` in lifted order.
    pub fn restrict(&self, omega: &SupportSet) -> Result<RestrictedOperator> {
        if let Some(&j) = omega.indices().iter().find(|&&j| j >= self.signal_len) {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.signal_len,
            });
        }
        let columns = omega.lifted(self.subspace_dim);
        let phi = linalg::select_columns(&self.phi, &columns);
        Ok(RestrictedOperator { columns, phi })
    }
}

/// Support restriction `Φ_Ω` together with its column indices in `Φ`.
#[derive(Debug, Clone)]
pub struct RestrictedOperator {
    pub columns: Vec<usize>,
    pub phi: CMatrix,
}

impl RestrictedOperator {
    /// `Φ_Ω* Φ_Ω`.
    pub fn gram(&self) -> CMatrix {
        self.phi.adjoint() * &self.phi
    }
}

fn check_lift_shapes(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.nrows() != b.nrows() {
        return Err(Error::shape(format!("B with {} rows", a.nrows()), format!("{} rows", b.nrows())));
    }
    Ok(())
}

/// `[Re y; Im y]`, the right-hand side for [`LiftedOperator::realified`].
pub fn realify_measurements(y: &CVector) -> CVector {
    let l = y.len();
    CVector::from_fn(2 * l, |r, _| Complex64::new(if r < l { y[r].re } else { y[r - l].im }, 0.0))
}

/// `𝒜(X)_l = b_l* X a_l`, computed as the row sums of `(B X) ∘ A` without
/// forming `Φ`.
pub fn apply_lift(a: &CMatrix, b: &CMatrix, x: &CMatrix) -> Result<CVector> {
    check_lift_shapes(a, b)?;
    if x.shape() != (b.ncols(), a.ncols()) {
        return Err(Error::shape(format!("X of shape {:?}", (b.ncols(), a.ncols())), format!("{:?}", x.shape())));
    }
    let bx = b * x;
    Ok(CVector::from_fn(a.nrows(), |l, _| {
        bx.row(l).iter().zip(a.row(l).iter()).map(|(p, q)| p * q).sum()
    }))
}

/// `𝒜*(u) = Σ_l u_l b_l a_l* = B* diag(u) conj(A)`.
pub fn apply_adjoint(a: &CMatrix, b: &CMatrix, u: &CVector) -> Result<CMatrix> {
    check_lift_shapes(a, b)?;
    if u.len() != a.nrows() {
        return Err(Error::shape(format!("u of length {}", a.nrows()), format!("{}", u.len())));
    }
    let weighted = DMatrix::from_fn(a.nrows(), a.ncols(), |l, j| u[l] * a[(l, j)].conj());
    Ok(b.adjoint() * weighted)
}

/// Measurement-geometry scalars of an operator and support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryScalars {
    /// `max |⟨φ̃, φ̃'⟩|` over distinct columns (unnormalized).
    pub mu: f64,
    /// Same maximum over unit-normalized columns.
    pub mu_normalized: f64,
    /// `max_ij √L |B_ij|`.
    pub mu_max: f64,
    /// `‖Φ‖`.
    pub gamma: f64,
    /// `‖Φ_Ω* Φ_Ω − I‖`.
    pub delta: f64,
}

/// `max_ij √L |B_ij|`.
pub fn mu_max(b: &CMatrix) -> f64 {
    let l = b.nrows() as f64;
    l.sqrt() * b.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest off-diagonal modulus of `Φ*Φ`, raw and with normalized columns.
/// The Gram matrix is formed in column blocks to bound memory.
pub fn coherence(op: &LiftedOperator) -> (f64, f64) {
    const BLOCK: usize = 256;
    let phi = op.phi();
    let cols = phi.ncols();
    let norms: Vec<f64> = phi.column_iter().map(|c| c.norm()).collect();
    let mut raw = 0.0f64;
    let mut normalized = 0.0f64;
    let mut start = 0;
    while start < cols {
        let width = BLOCK.min(cols - start);
        let block = phi.columns(start, width);
        let gram = block.adjoint() * phi;
        for bi in 0..width {
            let ci = start + bi;
            for cj in 0..cols {
                if cj == ci {
                    continue;
                }
                let g = gram[(bi, cj)].norm();
                raw = raw.max(g);
                let denom = norms[ci] * norms[cj];
                if denom > 0.0 {
                    normalized = normalized.max(g / denom);
                }
            }
        }
        start += width;
    }
    (raw, normalized)
}

/// `‖Φ_Ω* Φ_Ω − I‖`.
pub fn local_isometry_defect(op: &LiftedOperator, omega: &SupportSet) -> Result<f64> {
    let restricted = op.restrict(omega)?;
    let mut gram = restricted.gram();
    for i in 0..gram.nrows() {
        gram[(i, i)] -= Complex64::new(1.0, 0.0);
    }
    Ok(linalg::hermitian_spectral_norm(&gram))
}

pub fn geometry_scalars(op: &LiftedOperator, b: &CMatrix, omega: &SupportSet) -> Result<GeometryScalars> {
    let (mu, mu_normalized) = coherence(op);
    Ok(GeometryScalars {
        mu,
        mu_normalized,
        mu_max: mu_max(b),
        gamma: linalg::spectral_norm(op.phi()),
        delta: local_isometry_defect(op, omega)?,
    })
}

/// High-probability bound on `‖𝒜‖` for random Fourier `A`:
/// `√(2N(log(2kN) + 1) + 1)`.
pub fn gamma_bound_fourier(signal_len: usize, subspace_dim: usize) -> f64 {
    let n = signal_len as f64;
    let k = subspace_dim as f64;
    (2.0 * n * ((2.0 * k * n).ln() + 1.0) + 1.0).sqrt()
}

/// High-probability bound on `‖𝒜‖` for Gaussian `A`:
/// `√(N log(NL/2) + α log L)`.
pub fn gamma_bound_gaussian(signal_len: usize, measurements: usize, alpha: f64) -> f64 {
    let n = signal_len as f64;
    let l = measurements as f64;
    (n * (n * l / 2.0).ln() + alpha * l.ln()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{gen_dft_b, gen_fourier_a, gen_gaussian_a, gen_sparse_x, Dimensions, Entries};
    use nalgebra::DVector;

    fn complex_gaussian(r: usize, c: usize, seed: u64) -> CMatrix {
        let d = Dimensions::new(r, 2 * c, 1, 1).unwrap();
        let g = gen_gaussian_a(&d, seed);
        DMatrix::from_fn(r, c, |i, j| Complex64::new(g[(i, j)].re, g[(i, c + j)].re))
    }

    #[test]
    fn rank_one_subspace_scales_a() {
        let d = Dimensions::new(6, 5, 1, 1).unwrap();
        let a = gen_gaussian_a(&d, 1);
        let b = gen_dft_b(6, 1).unwrap();
        let op = LiftedOperator::build(&a, &b).unwrap();
        let expected = &a / Complex64::new(6f64.sqrt(), 0.0);
        assert!((op.phi() - expected).norm() < 1e-14);
    }

    #[test]
    fn realified_preserves_real_residuals() {
        let a = complex_gaussian(5, 3, 7);
        let b = complex_gaussian(5, 2, 8);
        let op = LiftedOperator::build(&a, &b).unwrap();
        let re = op.realified();
        assert_eq!(re.phi().shape(), (10, 6));
        assert!(re.phi().iter().all(|z| z.im == 0.0));
        let v: Vec<Complex64> = (0..6).map(|i| Complex64::new(i as f64 - 2.5, 0.0)).collect();
        let y = complex_gaussian(5, 1, 9).column(0).into_owned();
        let r_complex = (op.apply(&v) - &y).norm();
        let r_real = (re.apply(&v) - realify_measurements(&y)).norm();
        assert!((r_complex - r_real).abs() <= 1e-12 * r_complex);
    }

    #[test]
    fn layout_law() {
        let a = complex_gaussian(4, 3, 2);
        let b = complex_gaussian(4, 2, 3);
        let op = LiftedOperator::build(&a, &b).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let c = op.column_index(i, j);
                assert_eq!(c, j * 2 + i);
                let expected = b.column(i).component_mul(&a.column(j));
                assert!((op.phi().column(c) - expected).norm() == 0.0);
            }
        }
    }

    #[test]
    fn explicit_matches_scalar_loop() {
        let a = complex_gaussian(3, 2, 4);
        let b = complex_gaussian(3, 2, 5);
        let op = LiftedOperator::build(&a, &b).unwrap();
        for s in 0..20 {
            let x = complex_gaussian(2, 2, 100 + s);
            let y = op.apply(x.as_slice());
            for l in 0..3 {
                // b_l* X a_l with b_l* = row l of B.
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..2 {
                    for j in 0..2 {
                        acc += b[(l, i)] * x[(i, j)] * a[(l, j)];
                    }
                }
                assert!((y[l] - acc).norm() <= 1e-12 * acc.norm().max(1.0));
            }
        }
    }

    #[test]
    fn matrix_free_paths_agree() {
        let a = complex_gaussian(8, 5, 6);
        let b = complex_gaussian(8, 3, 7);
        let op = LiftedOperator::build(&a, &b).unwrap();
        let x = complex_gaussian(3, 5, 8);
        let free = apply_lift(&a, &b, &x).unwrap();
        let dense = op.apply(x.as_slice());
        assert!((&free - &dense).norm() <= 1e-12 * dense.norm());
        assert_eq!(apply_lift(&a, &b, &DMatrix::zeros(3, 5)).unwrap().norm(), 0.0);

        let u = complex_gaussian(8, 1, 9).column(0).into_owned();
        let adj = apply_adjoint(&a, &b, &u).unwrap();
        let dense_adj = op.unvec(op.adjoint(u.as_slice()).as_slice());
        assert!((&adj - &dense_adj).norm() <= 1e-12 * dense_adj.norm());
        assert_eq!(apply_adjoint(&a, &b, &DVector::zeros(8)).unwrap().norm(), 0.0);

        assert!(apply_lift(&a, &b, &DMatrix::zeros(2, 5)).is_err());
        assert!(apply_adjoint(&a, &b, &DVector::zeros(7)).is_err());
    }

    #[test]
    fn rank_one_lift_matches_measurement() {
        let d = Dimensions::new(8, 6, 2, 2).unwrap();
        let a = gen_fourier_a(&d, 3);
        let b = gen_dft_b(8, 2).unwrap();
        let h = complex_gaussian(2, 1, 4).column(0).into_owned();
        let (x, _) = gen_sparse_x(6, 2, 5, Entries::Complex).unwrap();
        let lifted = apply_lift(&a, &b, &(&h * x.transpose())).unwrap();
        let direct = crate::problem::measure(&a, &b, &h, &x, None).unwrap();
        assert!((lifted - &direct).norm() <= 1e-12 * direct.norm());
    }

    #[test]
    fn memory_guard() {
        let a = complex_gaussian(4, 4, 1);
        let b = complex_gaussian(4, 2, 2);
        assert!(matches!(LiftedOperator::build_with_cap(&a, &b, 31), Err(Error::TooLarge { .. })));
        assert!(LiftedOperator::build_with_cap(&a, &b, 32).is_ok());
    }

    #[test]
    fn restriction() {
        let a = complex_gaussian(6, 5, 1);
        let b = complex_gaussian(6, 2, 2);
        let op = LiftedOperator::build(&a, &b).unwrap();
        let all = op.restrict(&SupportSet::full(5)).unwrap();
        assert_eq!(all.phi, *op.phi());
        let omega = SupportSet::new(vec![1, 4], 5).unwrap();
        let r = op.restrict(&omega).unwrap();
        assert_eq!(r.phi.ncols(), 4);
        let full_gram = op.phi().adjoint() * op.phi();
        let sub = r.gram();
        for (p, &cp) in r.columns.iter().enumerate() {
            for (q, &cq) in r.columns.iter().enumerate() {
                assert!((sub[(p, q)] - full_gram[(cp, cq)]).norm() < 1e-12);
            }
        }
        let bad = SupportSet::new(vec![7], 8).unwrap();
        assert!(op.restrict(&bad).is_err());
    }

    #[test]
    fn geometry_of_orthonormal_columns() {
        // Φ with orthonormal columns: identity-like A with B = 1.
        let a = DMatrix::<Complex64>::identity(4, 4);
        let b = DMatrix::from_element(4, 1, Complex64::new(1.0, 0.0));
        let op = LiftedOperator::build(&a, &b).unwrap();
        let omega = SupportSet::new(vec![0, 2], 4).unwrap();
        let g = geometry_scalars(&op, &b, &omega).unwrap();
        assert!(g.delta < 1e-14);
        assert_eq!(g.mu, 0.0);
        assert!((g.gamma - 1.0).abs() < 1e-12);
        assert!((g.mu_max - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dft_basis_has_unit_mu_max() {
        let b = gen_dft_b(32, 4).unwrap();
        assert!((mu_max(&b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_cross_checks() {
        for seed in 0..3 {
            let d = Dimensions::new(16, 12, 2, 1).unwrap();
            let a = gen_fourier_a(&d, seed);
            let b = gen_dft_b(16, 2).unwrap();
            let op = LiftedOperator::build(&a, &b).unwrap();
            let (vals, _) = linalg::hermitian_eigen(&(op.phi().adjoint() * op.phi()));
            let top = vals.last().unwrap().sqrt();
            let power = linalg::power_norm(op.phi(), linalg::POWER_TOL, linalg::POWER_MAX_ITERS);
            assert!((top - power).abs() <= 1e-8 * top);
            assert!((top - linalg::spectral_norm(op.phi())).abs() <= 1e-8 * top);
        }
    }

    #[test]
    fn coherence_matches_brute_force() {
        let a = complex_gaussian(5, 4, 11);
        let b = complex_gaussian(5, 2, 12);
        let op = LiftedOperator::build(&a, &b).unwrap();
        let (raw, normalized) = coherence(&op);
        let phi = op.phi();
        let mut best = 0.0f64;
        let mut best_n = 0.0f64;
        for i in 0..phi.ncols() {
            for j in 0..phi.ncols() {
                if i != j {
                    let ip = phi.column(i).dotc(&phi.column(j)).norm();
                    best = best.max(ip);
                    best_n = best_n.max(ip / (phi.column(i).norm() * phi.column(j).norm()));
                }
            }
        }
        assert!((raw - best).abs() < 1e-12);
        assert!((normalized - best_n).abs() < 1e-12);
        assert!(normalized <= 1.0 + 1e-12);
    }

    #[test]
    fn bounds_formulas() {
        let f = gamma_bound_fourier(256, 3);
        assert!((f - (512.0 * ((1536f64).ln() + 1.0) + 1.0).sqrt()).abs() < 1e-12);
        let g = gamma_bound_gaussian(256, 128, 1.0);
        assert!((g - (256.0 * (16384f64).ln() + (128f64).ln()).sqrt()).abs() < 1e-12);
    }
}
