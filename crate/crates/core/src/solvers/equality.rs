//! Equality-constrained sparse programs `min ‖v‖ s.t. Φv = y` for the entrywise
//! `ℓ1` norm and the column-group `ℓ2,1` norm.
//!
//! ADMM alternates between the affine projection
//! `v ↦ v − Ψ*(Ψv − y')` (with `Ψ` the orthonormalized rows of `Φ`) and
//! group soft-thresholding. Every `check_every` iterations the current
//! iterate is tested for optimality in two ways:
//!
//! 1. polish: least squares on the detected support, paired with a dual
//!    vector that matches the subgradient on the support exactly. The
//!    relative gap is then `1 − 1/max(1, ‖g_off‖)`.
//! 2. project: the affine projection of the sparse iterate, paired with the
//!    scaled ADMM multiplier.

use num_complex::Complex64;

use super::prox::{group_dual_norm, group_norm, shrink_groups};
use super::rowspace::RowSpace;
use super::{check_y, IterationRecord, Penalty, SolverOptions, SolverResult};
use crate::error::Result;
use crate::lifting::LiftedOperator;
use crate::linalg::{self, mul_into, adjoint_mul_into};
use crate::CVector;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Groups below this fraction of the largest group are dropped after a
/// least-squares polish.
const PRUNE_REL: f64 = 1e-9;

/// Basis pursuit `min ‖v‖₁ s.t. Φv = y`.
pub fn solve_bp(op: &LiftedOperator, y: &CVector, opts: &SolverOptions) -> Result<SolverResult> {
    solve_equality(op, y, Penalty::L1, opts)
}

struct Candidate {
    /// Normalized units.
    v: Vec<Complex64>,
    /// Row-space dual `u'`.
    dual: Vec<Complex64>,
    gap: f64,
    primal: f64,
    polished: bool,
}

struct Checker<'a> {
    op: &'a LiftedOperator,
    rows: &'a RowSpace,
    y: &'a CVector,
    yy: &'a [Complex64],
    scale: f64,
    group: usize,
    rho: f64,
}

impl Checker<'_> {
    fn primal_residual(&self, v: &[Complex64]) -> f64 {
        let scaled: Vec<Complex64> = v.iter().map(|z| z * self.scale).collect();
        let r = self.op.apply(&scaled) - self.y;
        r.norm() / (1.0 + self.y.norm())
    }

    fn groups_of(&self, v: &[Complex64], keep: impl Fn(f64) -> bool) -> Vec<usize> {
        v.chunks(self.group)
            .enumerate()
            .filter(|(_, c)| keep(c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
            .map(|(g, _)| g)
            .collect()
    }

    fn columns(&self, groups: &[usize]) -> Vec<usize> {
        groups
            .iter()
            .flat_map(|&g| (g * self.group)..((g + 1) * self.group))
            .collect()
    }

    /// Least squares on `cols`; `None` if the restricted Gram is singular.
    fn least_squares(&self, cols: &[usize]) -> Option<(Vec<Complex64>, nalgebra::Cholesky<Complex64, nalgebra::Dyn>, crate::CMatrix)> {
        let psi_s = linalg::select_columns(&self.rows.psi, cols);
        let gram = psi_s.adjoint() * &psi_s;
        let chol = nalgebra::Cholesky::new(gram)?;
        let rhs = psi_s.adjoint() * CVector::from_column_slice(self.yy);
        let sol = chol.solve(&rhs);
        if sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return None;
        }
        Some((sol.as_slice().to_vec(), chol, psi_s))
    }

    fn off_support_norm(&self, g: &[Complex64], support_groups: &[usize]) -> f64 {
        let mut on = vec![false; g.len() / self.group];
        support_groups.iter().for_each(|&s| on[s] = true);
        g.chunks(self.group)
            .zip(on)
            .filter(|(_, is_on)| !is_on)
            .map(|(c, _)| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    fn polish(&self, z: &[Complex64], admm_dual: &[Complex64]) -> Option<Candidate> {
        let rank = self.rows.rank();
        let mut groups = self.groups_of(z, |r| r > 0.0);
        if groups.is_empty() || groups.len() * self.group > rank {
            return None;
        }
        let mut cols = self.columns(&groups);
        let (mut sol, mut chol, mut psi_s) = self.least_squares(&cols)?;
        let local: Vec<Complex64> = sol.clone();
        let largest = group_dual_norm(&local, self.group);
        let kept: Vec<usize> = local
            .chunks(self.group)
            .enumerate()
            .filter(|(_, c)| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() > PRUNE_REL * largest)
            .map(|(i, _)| i)
            .collect();
        if kept.is_empty() {
            return None;
        }
        if kept.len() < groups.len() {
            groups = kept.iter().map(|&i| groups[i]).collect();
            cols = self.columns(&groups);
            (sol, chol, psi_s) = self.least_squares(&cols)?;
        }

        let n = z.len();
        let mut v = vec![ZERO; n];
        for (&c, &s) in cols.iter().zip(&sol) {
            v[c] = s;
        }
        // Subgradient on the support: v_g / ‖v_g‖.
        let mut sign = CVector::from_column_slice(&sol);
        for chunk in sign.as_mut_slice().chunks_mut(self.group) {
            let r = chunk.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if r > 0.0 {
                chunk.iter_mut().for_each(|z| *z /= r);
            }
        }
        // Least-norm certificate and the ADMM multiplier corrected onto
        // {u : Ψ_S* u = sign}; keep whichever has the smaller off-support norm.
        let u_ls = &psi_s * chol.solve(&sign);
        let u_admm = CVector::from_column_slice(admm_dual);
        let mismatch = &sign - psi_s.adjoint() * &u_admm;
        let u_corr = &u_admm + &psi_s * chol.solve(&mismatch);
        let mut best: Option<(f64, Vec<Complex64>)> = None;
        let mut g = vec![ZERO; n];
        for u in [u_ls, u_corr] {
            adjoint_mul_into(&self.rows.psi, u.as_slice(), &mut g);
            let off = self.off_support_norm(&g, &groups);
            if best.as_ref().is_none_or(|(b, _)| off < *b) {
                best = Some((off, u.as_slice().to_vec()));
            }
        }
        let (off, dual) = best?;
        Some(Candidate {
            primal: self.primal_residual(&v),
            gap: 1.0 - 1.0 / off.max(1.0),
            v,
            dual,
            polished: true,
        })
    }

    fn project(&self, z: &[Complex64], admm_dual: &[Complex64]) -> Candidate {
        let rank = self.rows.rank();
        let mut r = vec![ZERO; rank];
        mul_into(&self.rows.psi, z, &mut r);
        r.iter_mut().zip(self.yy).for_each(|(a, b)| *a -= b);
        let mut corr = vec![ZERO; z.len()];
        adjoint_mul_into(&self.rows.psi, &r, &mut corr);
        let v: Vec<Complex64> = z.iter().zip(&corr).map(|(a, b)| a - b).collect();

        let mut g = vec![ZERO; z.len()];
        adjoint_mul_into(&self.rows.psi, admm_dual, &mut g);
        let dual_scale = group_dual_norm(&g, self.group).max(1.0);
        let dual: Vec<Complex64> = admm_dual.iter().map(|u| u / dual_scale).collect();
        let dual_obj = linalg::re_dot(&dual, self.yy);
        let primal_obj = group_norm(&v, self.group);
        let gap = (primal_obj - dual_obj).abs() / primal_obj.max(f64::MIN_POSITIVE);
        Candidate {
            primal: self.primal_residual(&v),
            gap,
            v,
            dual,
            polished: false,
        }
    }

    /// `u' = Ψ(ρu)`: the ADMM multiplier mapped into the row space.
    fn admm_dual(&self, u: &[Complex64]) -> Vec<Complex64> {
        let scaled: Vec<Complex64> = u.iter().map(|z| z * self.rho).collect();
        let mut out = vec![ZERO; self.rows.rank()];
        mul_into(&self.rows.psi, &scaled, &mut out);
        out
    }
}

pub(crate) fn solve_equality(op: &LiftedOperator, y: &CVector, penalty: Penalty, opts: &SolverOptions) -> Result<SolverResult> {
    opts.validate()?;
    check_y(op, y)?;
    let rows = RowSpace::new(op)?;
    let rank = rows.rank();
    if y.norm() == 0.0 {
        return Ok(SolverResult::zero(op, rank));
    }
    let group = penalty.group(op);
    let n = op.lifted_len();
    let yw = rows.whiten(y);
    let mut v = vec![ZERO; n];
    adjoint_mul_into(&rows.psi, yw.as_slice(), &mut v);
    let scale = linalg::l2_norm(&v) / (n as f64).sqrt();
    if scale == 0.0 {
        return Ok(SolverResult::zero(op, rank));
    }
    let yy: Vec<Complex64> = yw.iter().map(|z| z / scale).collect();
    let checker = Checker {
        op,
        rows: &rows,
        y,
        yy: &yy,
        scale,
        group,
        rho: opts.rho,
    };

    let thresh = 1.0 / opts.rho;
    let mut z = vec![ZERO; n];
    let mut u = vec![ZERO; n];
    let mut t = vec![ZERO; n];
    let mut z_prev = vec![ZERO; n];
    let mut r = vec![ZERO; rank];
    let mut trace = Vec::new();

    let finish = |cand: Candidate, iterations: usize, converged: bool, trace: Vec<IterationRecord>| {
        let v_hat = CVector::from_iterator(n, cand.v.iter().map(|z| z * scale));
        SolverResult {
            objective: group_norm(v_hat.as_slice(), group),
            v_hat,
            subspace_dim: op.subspace_dim(),
            signal_len: op.signal_len(),
            iterations,
            primal_residual: cand.primal,
            dual_residual: cand.gap,
            converged,
            dual: Some(rows.unwhiten_dual(&cand.dual)),
            row_rank: rank,
            polished: cand.polished,
            trace,
        }
    };

    for it in 1..=opts.max_iters {
        // v = P(z − u)
        t.iter_mut().zip(z.iter().zip(&u)).for_each(|(t, (z, u))| *t = z - u);
        mul_into(&rows.psi, &t, &mut r);
        r.iter_mut().zip(&yy).for_each(|(a, b)| *a -= b);
        adjoint_mul_into(&rows.psi, &r, &mut v);
        v.iter_mut().zip(&t).for_each(|(v, t)| *v = t - *v);

        std::mem::swap(&mut z, &mut z_prev);
        z.iter_mut().zip(v.iter().zip(&u)).for_each(|(z, (v, u))| *z = v + u);
        shrink_groups(&mut z, group, thresh);

        let mut split = 0.0;
        let mut du = 0.0;
        for ((u, v), z) in u.iter_mut().zip(&v).zip(&z) {
            let d = v - z;
            *u += d;
            let n2 = d.norm_sqr();
            split += n2;
            du += n2;
        }
        if opts.trace {
            let dz: f64 = z.iter().zip(&z_prev).map(|(a, b)| (a - b).norm_sqr()).sum();
            trace.push(IterationRecord {
                iteration: it,
                primal_residual: split.sqrt(),
                dual_residual: opts.rho * dz.sqrt(),
                objective: scale * group_norm(&z, group),
                merit: dz + du,
            });
        }

        if it % opts.check_every == 0 || it == opts.max_iters {
            let admm_dual = checker.admm_dual(&u);
            let mut polished = if opts.polish { checker.polish(&z, &admm_dual) } else { None };
            let accept = |c: &Candidate| c.primal <= opts.tol_primal && c.gap <= opts.tol_dual;
            if let Some(c) = polished.take_if(|c| accept(c)) {
                return Ok(finish(c, it, true, trace));
            }
            let projected = checker.project(&z, &admm_dual);
            if accept(&projected) {
                return Ok(finish(projected, it, true, trace));
            }
            if it == opts.max_iters {
                let best = match polished {
                    Some(c) if c.primal <= opts.tol_primal && c.gap < projected.gap => c,
                    _ => projected,
                };
                return Ok(finish(best, it, false, trace));
            }
        }
    }
    unreachable!("loop returns at max_iters")
}
