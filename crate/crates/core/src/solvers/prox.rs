//! Proximal maps of the sparsity and rank penalties.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::CMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex soft-thresholding: `z ↦ z·max(1 − τ/|z|, 0)`.
pub fn prox_l1_complex(z: &[Complex64], tau: f64) -> Vec<Complex64> {
    let mut out = z.to_vec();
    shrink_groups(&mut out, 1, tau);
    out
}

/// Block soft-thresholding of consecutive groups of `group` entries, in place.
/// `group = 1` is entrywise complex shrinkage.
pub fn shrink_groups(v: &mut [Complex64], group: usize, tau: f64) {
    debug_assert!(group > 0 && v.len().is_multiple_of(group));
    if group == 1 {
        for z in v.iter_mut() {
            let r = z.norm();
            *z = if r > tau { *z * (1.0 - tau / r) } else { ZERO };
        }
        return;
    }
    for chunk in v.chunks_mut(group) {
        let r = chunk.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if r > tau {
            let f = 1.0 - tau / r;
            chunk.iter_mut().for_each(|z| *z *= f);
        } else {
            chunk.fill(ZERO);
        }
    }
}

/// Column-wise block shrinkage: each column `c ↦ c·max(1 − τ/‖c‖, 0)`.
pub fn prox_l21_columns(x: &CMatrix, tau: f64) -> CMatrix {
    let mut out = x.clone();
    let k = x.nrows();
    if k > 0 {
        shrink_groups(out.as_mut_slice(), k, tau);
    }
    out
}

/// Singular-value soft-thresholding `U·max(Σ − τ, 0)·V*`.
pub fn prox_nuclear(x: &CMatrix, tau: f64) -> Result<CMatrix> {
    if x.is_empty() || tau == 0.0 {
        return Ok(x.clone());
    }
    // nalgebra's SVD is cheapest on tall matrices.
    let wide = x.nrows() < x.ncols();
    let m = if wide { x.adjoint() } else { x.clone() };
    let mut svd = crate::linalg::svd(&m)?;
    svd.singular_values.iter_mut().for_each(|s| *s = (*s - tau).max(0.0));
    let shrunk: DMatrix<Complex64> = svd
        .recompose()
        .map_err(|e| Error::Numerical(format!("SVD recomposition failed: {e}")))?;
    Ok(if wide { shrunk.adjoint() } else { shrunk })
}

/// `Σ_g ‖v_g‖` over consecutive groups.
pub fn group_norm(v: &[Complex64], group: usize) -> f64 {
    v.chunks(group)
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .sum()
}

/// Dual norm `max_g ‖v_g‖`.
pub fn group_dual_norm(v: &[Complex64], group: usize) -> f64 {
    v.chunks(group)
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Nuclear norm (sum of singular values).
pub fn nuclear_norm(x: &CMatrix) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.singular_values().iter().sum()
}
