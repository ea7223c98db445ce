//! Noise-ball programs `min ‖v‖ s.t. ‖Φv − y‖₂ ≤ η`.
//!
//! ADMM on the splitting `v = z`, `Φv − r = y` with `‖r‖ ≤ η`. The `v`-step
//! solves `(I + Φ*Φ)v = a + Φ*b` through the `L × L` system `I + ΦΦ*`.
//! The dual certificate is `u = −ρ·u₂`, scaled into the dual-norm ball, with
//! dual objective `Re⟨u, y⟩ − η‖u‖`.

use num_complex::Complex64;

use super::prox::{group_dual_norm, group_norm, shrink_groups};
use super::{check_y, equality, IterationRecord, Penalty, SolverOptions, SolverResult};
use crate::error::{Error, Result};
use crate::lifting::LiftedOperator;
use crate::linalg::{self, adjoint_mul_into, mul_into};
use crate::{CMatrix, CVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Basis pursuit denoising `min ‖v‖₁ s.t. ‖Φv − y‖ ≤ η`. `η = 0` is basis
/// pursuit.
pub fn solve_bpdn(op: &LiftedOperator, y: &CVector, eta: f64, opts: &SolverOptions) -> Result<SolverResult> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("eta must be finite and nonnegative, got {eta}")));
    }
    if eta == 0.0 {
        return equality::solve_bp(op, y, opts);
    }
    solve_ball(op, y, eta, Penalty::L1, opts)
}

fn project_ball(r: &mut [Complex64], radius: f64) {
    let n = linalg::l2_norm(r);
    if n > radius {
        let f = radius / n;
        r.iter_mut().for_each(|z| *z *= f);
    }
}

pub(crate) fn solve_ball(op: &LiftedOperator, y: &CVector, eta: f64, penalty: Penalty, opts: &SolverOptions) -> Result<SolverResult> {
    opts.validate()?;
    check_y(op, y)?;
    let l = op.measurements();
    let n = op.lifted_len();
    let group = penalty.group(op);
    let y_norm = y.norm();
    if y_norm <= eta {
        return Ok(SolverResult::zero(op, l));
    }

    // Normalize Φ to unit spectral norm and y so the solution has unit rms.
    let gram = op.row_gram();
    let c2 = linalg::hermitian_spectral_norm(&gram);
    if !(c2 > 0.0) {
        return Err(Error::Numerical("lifted operator is zero".into()));
    }
    let c = c2.sqrt();
    let phi = op.phi();
    let mut back = vec![ZERO; n];
    adjoint_mul_into(phi, y.as_slice(), &mut back);
    let scale = linalg::l2_norm(&back) / c / (n as f64).sqrt();
    if scale == 0.0 {
        return Ok(SolverResult::zero(op, l));
    }
    let yy: Vec<Complex64> = y.iter().map(|z| z / scale).collect();
    let eta_n = eta / scale;
    let g_n: CMatrix = gram.map(|z| z / c2);
    let mut system = g_n.clone();
    for i in 0..l {
        system[(i, i)] += Complex64::new(1.0, 0.0);
    }
    let chol = linalg::cholesky(&system)?;

    // Φn x = Φx / c
    let phi_n = |x: &[Complex64], out: &mut [Complex64]| {
        mul_into(phi, x, out);
        out.iter_mut().for_each(|z| *z /= c);
    };
    let phi_n_adj = |x: &[Complex64], out: &mut [Complex64]| {
        adjoint_mul_into(phi, x, out);
        out.iter_mut().for_each(|z| *z /= c);
    };

    let rho = opts.rho;
    let thresh = 1.0 / rho;
    let mut z = vec![ZERO; n];
    let mut z_prev = vec![ZERO; n];
    let mut u1 = vec![ZERO; n];
    let mut u2 = vec![ZERO; l];
    let mut r = vec![ZERO; l];
    let mut a = vec![ZERO; n];
    let mut v = vec![ZERO; n];
    let mut phi_a = vec![ZERO; l];
    let mut phi_v = vec![ZERO; l];
    let mut phi_z = vec![ZERO; l];
    let mut g = vec![ZERO; n];
    let mut trace = Vec::new();

    // (primal residual, gap, dual) in reporting units for the sparse iterate.
    let assess = |z: &[Complex64], u2: &[Complex64], phi_z: &mut [Complex64], g: &mut [Complex64]| {
        phi_n(z, phi_z);
        let res: f64 = phi_z.iter().zip(&yy).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let primal = (res - eta_n).max(0.0) * scale / (1.0 + y_norm);
        let dual: Vec<Complex64> = u2.iter().map(|w| -w * rho).collect();
        phi_n_adj(&dual, g);
        let dual_scale = group_dual_norm(g, group).max(1.0);
        let d_obj = (linalg::re_dot(&dual, &yy) - eta_n * linalg::l2_norm(&dual)) / dual_scale;
        let p_obj = group_norm(z, group);
        let gap = (p_obj - d_obj).abs() / p_obj.max(f64::MIN_POSITIVE);
        // Φ*u = (Φn*u)/c... in original units the certificate is u/(c·dual_scale).
        let u_orig = CVector::from_iterator(l, dual.iter().map(|w| w / (c * dual_scale)));
        (primal, gap, u_orig)
    };

    let mut it = 0;
    loop {
        it += 1;
        // v-step
        a.iter_mut().zip(z.iter().zip(&u1)).for_each(|(a, (z, u))| *a = z - u);
        let b: CVector = CVector::from_iterator(l, (0..l).map(|i| yy[i] + r[i] - u2[i]));
        phi_n(&a, &mut phi_a);
        let gb = &g_n * &b;
        let rhs = CVector::from_iterator(l, (0..l).map(|i| phi_a[i] + gb[i]));
        let cvec = &b - chol.solve(&rhs);
        phi_n_adj(cvec.as_slice(), &mut v);
        v.iter_mut().zip(&a).for_each(|(v, a)| *v += a);
        let gc = &g_n * &cvec;
        phi_v.iter_mut().enumerate().for_each(|(i, p)| *p = phi_a[i] + gc[i]);

        // z- and r-steps
        std::mem::swap(&mut z, &mut z_prev);
        z.iter_mut().zip(v.iter().zip(&u1)).for_each(|(z, (v, u))| *z = v + u);
        shrink_groups(&mut z, group, thresh);
        let r_prev = r.clone();
        r.iter_mut().enumerate().for_each(|(i, r)| *r = phi_v[i] - yy[i] + u2[i]);
        project_ball(&mut r, eta_n);

        // multipliers
        let mut du = 0.0;
        let mut split = 0.0;
        for ((u, v), z) in u1.iter_mut().zip(&v).zip(&z) {
            let d = v - z;
            *u += d;
            du += d.norm_sqr();
            split += d.norm_sqr();
        }
        for i in 0..l {
            let d = phi_v[i] - yy[i] - r[i];
            u2[i] += d;
            du += d.norm_sqr();
            split += d.norm_sqr();
        }
        if opts.trace {
            let dz: f64 = z.iter().zip(&z_prev).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
                + r.iter().zip(&r_prev).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
            trace.push(IterationRecord {
                iteration: it,
                primal_residual: split.sqrt(),
                dual_residual: rho * dz.sqrt(),
                objective: scale / c * group_norm(&z, group),
                merit: dz + du,
            });
        }

        if it % opts.check_every == 0 || it == opts.max_iters {
            let (primal, gap, dual) = assess(&z, &u2, &mut phi_z, &mut g);
            let converged = primal <= opts.tol_primal && gap <= opts.tol_dual;
            if converged || it == opts.max_iters {
                // v = s·v'/c in original units.
                let v_hat = CVector::from_iterator(n, z.iter().map(|w| w * (scale / c)));
                return Ok(SolverResult {
                    objective: group_norm(v_hat.as_slice(), group),
                    v_hat,
                    subspace_dim: op.subspace_dim(),
                    signal_len: op.signal_len(),
                    iterations: it,
                    primal_residual: primal,
                    dual_residual: gap,
                    converged,
                    dual: Some(dual),
                    row_rank: l,
                    polished: false,
                    trace,
                });
            }
        }
    }
}
