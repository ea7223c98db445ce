//! `min α‖X‖_* + β‖X‖₁ s.t. 𝒜(X) = y` by consensus ADMM over three copies
//! of `X`: one per penalty and one for the affine constraint.

use num_complex::Complex64;

use super::prox::{nuclear_norm, prox_nuclear, shrink_groups};
use super::rowspace::RowSpace;
use super::{check_y, IterationRecord, SolverOptions, SolverResult};
use crate::error::{Error, Result};
use crate::lifting::LiftedOperator;
use crate::linalg::{self, adjoint_mul_into, mul_into};
use crate::{CMatrix, CVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `min ‖X‖_* + λ‖X‖₁ s.t. 𝒜(X) = y`.
pub fn solve_l1_nuclear(op: &LiftedOperator, y: &CVector, lambda: f64, opts: &SolverOptions) -> Result<SolverResult> {
    solve_mixed(op, y, 1.0, lambda, opts)
}

/// `min w_nuc‖X‖_* + w_l1‖X‖₁ s.t. 𝒜(X) = y`.
///
/// The returned `X̂` is the copy that satisfies the constraint exactly.
/// Iteration stops when the consensus residual and the change in the consensus
/// variable, both relative to `‖Z‖`, fall below the tolerances;
/// `dual_residual` reports the latter.
pub fn solve_mixed(op: &LiftedOperator, y: &CVector, w_nuc: f64, w_l1: f64, opts: &SolverOptions) -> Result<SolverResult> {
    opts.validate()?;
    check_y(op, y)?;
    for (name, w) in [("nuclear weight", w_nuc), ("l1 weight", w_l1)] {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be finite and nonnegative, got {w}")));
        }
    }
    let top = w_nuc.max(w_l1);
    if top == 0.0 {
        return Err(Error::InvalidParameter("at least one weight must be positive".into()));
    }
    let (w_nuc, w_l1) = (w_nuc / top, w_l1 / top);

    let rows = RowSpace::new(op)?;
    let rank = rows.rank();
    if y.norm() == 0.0 {
        return Ok(SolverResult::zero(op, rank));
    }
    let k = op.subspace_dim();
    let big_n = op.signal_len();
    let n = op.lifted_len();
    let yw = rows.whiten(y);
    let mut tmp = vec![ZERO; n];
    adjoint_mul_into(&rows.psi, yw.as_slice(), &mut tmp);
    let scale = linalg::l2_norm(&tmp) / (n as f64).sqrt();
    if scale == 0.0 {
        return Ok(SolverResult::zero(op, rank));
    }
    let yy: Vec<Complex64> = yw.iter().map(|z| z / scale).collect();

    let rho = opts.rho;
    let mut zc = tmp.iter().map(|z| z / scale).collect::<Vec<_>>();
    let mut z_prev = vec![ZERO; n];
    let mut x: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![ZERO; n]);
    let mut u: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![ZERO; n]);
    let mut r = vec![ZERO; rank];
    let mut trace = Vec::new();

    let project = |t: &mut [Complex64], r: &mut [Complex64], scratch: &mut [Complex64]| {
        mul_into(&rows.psi, t, r);
        r.iter_mut().zip(&yy).for_each(|(a, b)| *a -= b);
        adjoint_mul_into(&rows.psi, r, scratch);
        t.iter_mut().zip(scratch.iter()).for_each(|(t, c)| *t -= c);
    };

    let mut it = 0;
    loop {
        it += 1;
        // Nuclear copy.
        let t: Vec<Complex64> = zc.iter().zip(&u[0]).map(|(z, u)| z - u).collect();
        if w_nuc > 0.0 {
            let m = CMatrix::from_column_slice(k, big_n, &t);
            x[0] = prox_nuclear(&m, w_nuc / rho)?.as_slice().to_vec();
        } else {
            x[0] = t;
        }
        // ℓ1 copy.
        x[1] = zc.iter().zip(&u[1]).map(|(z, u)| z - u).collect();
        shrink_groups(&mut x[1], 1, w_l1 / rho);
        // Affine copy.
        x[2] = zc.iter().zip(&u[2]).map(|(z, u)| z - u).collect();
        project(&mut x[2], &mut r, &mut tmp);

        std::mem::swap(&mut zc, &mut z_prev);
        for i in 0..n {
            zc[i] = (x[0][i] + u[0][i] + x[1][i] + u[1][i] + x[2][i] + u[2][i]) / 3.0;
        }
        let mut primal_sq = 0.0;
        let mut du_sq = 0.0;
        for b in 0..3 {
            for i in 0..n {
                let d = x[b][i] - zc[i];
                u[b][i] += d;
                primal_sq += d.norm_sqr();
                du_sq += d.norm_sqr();
            }
        }
        let dz_sq: f64 = zc.iter().zip(&z_prev).map(|(a, b)| (a - b).norm_sqr()).sum();
        let z_norm = linalg::l2_norm(&zc).max(1.0);
        let primal = primal_sq.sqrt() / z_norm;
        let dual = (3.0 * dz_sq).sqrt() / z_norm;
        if opts.trace {
            let obj = scale * (w_nuc * nuclear_norm(&CMatrix::from_column_slice(k, big_n, &x[2])) + w_l1 * linalg::l1_norm(&x[2])) * top;
            trace.push(IterationRecord {
                iteration: it,
                primal_residual: primal_sq.sqrt(),
                dual_residual: rho * (3.0 * dz_sq).sqrt(),
                objective: obj,
                merit: 3.0 * dz_sq + du_sq,
            });
        }
        let check = it % opts.check_every == 0 || it == opts.max_iters;
        let converged = check && primal <= opts.tol_primal && dual <= opts.tol_dual;
        if converged || it == opts.max_iters {
            let v_hat = CVector::from_iterator(n, x[2].iter().map(|z| z * scale));
            let res = (op.apply(v_hat.as_slice()) - y).norm() / (1.0 + y.norm());
            let xm = CMatrix::from_column_slice(k, big_n, v_hat.as_slice());
            return Ok(SolverResult {
                objective: top * (w_nuc * nuclear_norm(&xm) + w_l1 * linalg::l1_norm(v_hat.as_slice())),
                v_hat,
                subspace_dim: k,
                signal_len: big_n,
                iterations: it,
                primal_residual: res,
                dual_residual: dual,
                converged,
                dual: None,
                row_rank: rank,
                polished: false,
                trace,
            });
        }
    }
}
