//! Orthonormal basis of the row space of `Φ`.
//!
//! With `ΦΦ* = U Λ U*`, `W = Λ_r^{−1/2} U_r*` keeps the `r` eigenvalues above a
//! relative threshold. `Ψ = WΦ` has orthonormal rows and `{v : Ψv = Wy}` is
//! the feasible set of `Φv = y` whenever `y ∈ range(Φ)`. Rank-deficient `Φ`
//! (for instance duplicated Fourier rows with `k = 1`) is handled by dropping
//! the null directions instead of inverting them.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lifting::LiftedOperator;
use crate::linalg;
use crate::{CMatrix, CVector};

const RANK_TOL: f64 = 1e-10;

pub(crate) struct RowSpace {
    /// `Ψ = WΦ`, `r × kN`.
    pub psi: CMatrix,
    /// `W`, `r × L`.
    pub w: CMatrix,
}

impl RowSpace {
    pub fn new(op: &LiftedOperator) -> Result<Self> {
        let gram = op.row_gram();
        let (values, vectors) = linalg::hermitian_eigen(&gram);
        let top = values.last().copied().unwrap_or(0.0);
        if !(top > 0.0) {
            return Err(Error::Numerical("lifted operator is zero".into()));
        }
        let kept: Vec<usize> = (0..values.len()).filter(|&i| values[i] > RANK_TOL * top).collect();
        let l = op.measurements();
        let w = DMatrix::from_fn(kept.len(), l, |r, c| {
            let i = kept[r];
            vectors[(c, i)].conj() / values[i].sqrt()
        });
        let psi = &w * op.phi();
        Ok(RowSpace { psi, w })
    }

    pub fn rank(&self) -> usize {
        self.psi.nrows()
    }

    pub fn whiten(&self, y: &CVector) -> CVector {
        &self.w * y
    }

    /// Maps a row-space dual `u'` to measurement space, `W* u'`, so that
    /// `Φ*(W* u') = Ψ* u'`.
    pub fn unwhiten_dual(&self, u: &[Complex64]) -> CVector {
        let mut out = CVector::zeros(self.w.ncols());
        linalg::adjoint_mul_into(&self.w, u, out.as_mut_slice());
        out
    }
}
