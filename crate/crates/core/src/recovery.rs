//! Rank-one extraction, gauge alignment and error metrics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{CMatrix, CVector};

/// Golden-section tolerance on `log|α|`.
const ALIGN_TOL: f64 = 1e-10;
const LOG_SCALE_RANGE: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    #[serde(with = "crate::serde_complex::vector")]
    pub h_hat: CVector,
    #[serde(with = "crate::serde_complex::vector")]
    pub x_hat: CVector,
    pub sigma1: f64,
    #[serde(with = "complex_pair")]
    pub alpha0: Complex64,
    /// `‖X̂ − X₀‖_F / ‖X₀‖_F`.
    pub rel_error: f64,
    /// `‖h₀ − α₀ĥ‖/‖h₀‖`.
    pub err_h: f64,
    /// `‖x₀ − α₀⁻¹x̂‖/‖x₀‖`.
    pub err_x: f64,
    /// `‖X̂ − X₀‖_F`.
    pub epsilon: f64,
}

mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

/// Leading singular triple of `X̂`, returned as `(ĥ, x̂, σ₁)` with
/// `ĥ = √σ₁·u₁` and `x̂ = √σ₁·conj(v₁)`, so that `ĥx̂ᵀ = σ₁u₁v₁*`.
pub fn extract_rank_one(x_hat: &CMatrix) -> Result<(CVector, CVector, f64)> {
    if x_hat.is_empty() || x_hat.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let svd = crate::linalg::svd(x_hat)?;
    let (u, v_t) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let top = (0..svd.singular_values.len())
        .max_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap();
    let sigma = svd.singular_values[top];
    let root = sigma.sqrt();
    // v_t holds V*, so row `top` is conj(v₁)ᵀ.
    let h = u.column(top).map(|z| z * root);
    let x = CVector::from_iterator(v_t.ncols(), v_t.row(top).iter().map(|z| z * root));
    Ok((h, x, sigma))
}

/// Finds `α₀ = argmin_α ‖h₀ − αĥ‖²/‖h₀‖² + ‖x₀ − α⁻¹x̂‖²/‖x₀‖²` and returns
/// it with the relative errors `‖h₀ − α₀ĥ‖/‖h₀‖` and `‖x₀ − α₀⁻¹x̂‖/‖x₀‖`.
///
/// For `|α| = r` the optimal phase is closed form; `log r` is found by a
/// coarse scan followed by golden-section search on `[−8, 8]`. A zero `ĥ` or
/// `x̂` admits no alignment and reports `(1, 1, 1)`.
pub fn align_scale(h_hat: &CVector, x_hat: &CVector, h0: &CVector, x0: &CVector) -> Result<(Complex64, f64, f64)> {
    if h_hat.len() != h0.len() {
        return Err(Error::shape(format!("h of length {}", h0.len()), format!("{}", h_hat.len())));
    }
    if x_hat.len() != x0.len() {
        return Err(Error::shape(format!("x of length {}", x0.len()), format!("{}", x_hat.len())));
    }
    let hh = h0.norm_squared();
    let xx = x0.norm_squared();
    if hh == 0.0 || xx == 0.0 {
        return Err(Error::InvalidParameter("ground truth h0 and x0 must be nonzero".into()));
    }
    let eh = h_hat.norm_squared();
    let ex = x_hat.norm_squared();
    if eh == 0.0 || ex == 0.0 {
        return Ok((Complex64::new(1.0, 0.0), 1.0, 1.0));
    }
    let a = h_hat.dotc(h0);
    let b = x_hat.dotc(x0);
    // Cross term at |α| = r; its phase is the optimal phase of α.
    let cross = |r: f64| a * (r / hh) + b.conj() / (r * xx);
    let alpha_at = |s: f64| {
        let r = s.exp();
        Complex64::from_polar(r, cross(r).arg())
    };
    // Evaluated from the residuals directly: the expanded quadratic loses
    // all precision near an exact fit.
    let objective = |s: f64| {
        let alpha = alpha_at(s);
        let dh: f64 = h0.iter().zip(h_hat.iter()).map(|(p, q)| (p - q * alpha).norm_sqr()).sum();
        let dx: f64 = x0.iter().zip(x_hat.iter()).map(|(p, q)| (p - q / alpha).norm_sqr()).sum();
        dh / hh + dx / xx
    };

    let steps = 160;
    let width = 2.0 * LOG_SCALE_RANGE / steps as f64;
    let grid = |i: usize| -LOG_SCALE_RANGE + width * i as f64;
    let best = (0..=steps)
        .min_by(|&i, &j| objective(grid(i)).total_cmp(&objective(grid(j))))
        .unwrap();
    let (mut lo, mut hi) = (grid(best.saturating_sub(1)), grid((best + 1).min(steps)));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while hi - lo > ALIGN_TOL {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = objective(d);
        }
    }
    let alpha = alpha_at(0.5 * (lo + hi));
    let err_h = (h0 - h_hat * alpha).norm() / hh.sqrt();
    let err_x = (x0 - x_hat / alpha).norm() / xx.sqrt();
    Ok((alpha, err_h, err_x))
}

/// `‖X̂ − X₀‖_F / ‖X₀‖_F` (infinite or NaN when `X₀ = 0`).
pub fn rel_error(x_hat: &CMatrix, x0: &CMatrix) -> f64 {
    (x_hat - x0).norm() / x0.norm()
}

/// Full recovery summary of `X̂` against the ground truth `(h₀, x₀)`.
pub fn recover(x_hat: &CMatrix, h0: &CVector, x0: &CVector) -> Result<RecoveryResult> {
    if x_hat.shape() != (h0.len(), x0.len()) {
        return Err(Error::shape(
            format!("{}x{}", h0.len(), x0.len()),
            format!("{}x{}", x_hat.nrows(), x_hat.ncols()),
        ));
    }
    let truth = h0 * x0.transpose();
    let epsilon = (x_hat - &truth).norm();
    let rel = epsilon / truth.norm();
    let (h_hat, xv_hat, sigma1, alpha0, err_h, err_x) = match extract_rank_one(x_hat) {
        Ok((h, x, s)) => {
            let (alpha, eh, ex) = align_scale(&h, &x, h0, x0)?;
            (h, x, s, alpha, eh, ex)
        }
        Err(Error::ZeroMatrix) => (
            CVector::zeros(h0.len()),
            CVector::zeros(x0.len()),
            0.0,
            Complex64::new(1.0, 0.0),
            1.0,
            1.0,
        ),
        Err(e) => return Err(e),
    };
    Ok(RecoveryResult {
        h_hat,
        x_hat: xv_hat,
        sigma1,
        alpha0,
        rel_error: rel,
        err_h,
        err_x,
        epsilon,
    })
}

/// Grid angles of the `n_sources` largest local maxima of `|x̂|`. An entry
/// is a local maximum when it is nonzero, strictly above its left neighbor
/// and not below its right neighbor, so a plateau yields one peak. Fewer
/// than `n_sources` angles come back when there are fewer peaks. Angles are
/// returned in ascending order.
pub fn detect_angles(x_hat: &[Complex64], theta_grid: &[f64], n_sources: usize) -> Result<Vec<f64>> {
    if x_hat.len() != theta_grid.len() {
        return Err(Error::shape(format!("grid of length {}", x_hat.len()), format!("{}", theta_grid.len())));
    }
    if n_sources > x_hat.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot pick {n_sources} sources from {} grid points",
            x_hat.len()
        )));
    }
    let m: Vec<f64> = x_hat.iter().map(|z| z.norm()).collect();
    let last = m.len().saturating_sub(1);
    let mut peaks: Vec<usize> = (0..m.len())
        .filter(|&i| m[i] > 0.0 && (i == 0 || m[i] > m[i - 1]) && (i == last || m[i] >= m[i + 1]))
        .collect();
    peaks.sort_by(|&a, &b| m[b].total_cmp(&m[a]).then(a.cmp(&b)));
    peaks.truncate(n_sources);
    let mut angles: Vec<f64> = peaks.iter().map(|&i| theta_grid[i]).collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}
