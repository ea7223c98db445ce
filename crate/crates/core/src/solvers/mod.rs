//! Proximal splitting solvers for the lifted convex programs:
//!
//! * [`solve_bp`]: `min ‖v‖₁ s.t. Φv = y`
//! * [`solve_bpdn`]: `min ‖v‖₁ s.t. ‖Φv − y‖ ≤ η`
//! * [`solve_l1_nuclear`]: `min ‖X‖_* + λ‖X‖₁ s.t. 𝒜(X) = y`
//! * [`solve_l21`]: `min Σ_j ‖X_{·,j}‖₂` under either constraint
//!
//! All solvers work on a rescaled copy of the data so that the default
//! penalty `rho = 1` is meaningful regardless of the magnitude of `y`.
//! Convergence is judged by the feasibility of the returned point and by a
//! relative duality gap against a dual-feasible certificate.

mod ball;
mod equality;
mod mixed;
pub mod prox;
mod rowspace;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{CMatrix, CVector};

pub use ball::solve_bpdn;
pub use equality::solve_bp;
pub use mixed::{solve_l1_nuclear, solve_mixed};
pub use prox::{prox_l1_complex, prox_l21_columns, prox_nuclear};

use crate::lifting::LiftedOperator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Augmented-Lagrangian penalty on the normalized problem.
    pub rho: f64,
    /// Relative feasibility tolerance.
    pub tol_primal: f64,
    /// Relative duality-gap tolerance.
    pub tol_dual: f64,
    pub max_iters: usize,
    /// Iterations between convergence checks.
    pub check_every: usize,
    /// Re-solve on the detected support when checking convergence.
    pub polish: bool,
    /// Record per-iteration telemetry.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl SolverOptions {
    pub fn noiseless() -> Self {
        SolverOptions {
            rho: 1.0,
            tol_primal: 1e-9,
            tol_dual: 1e-9,
            max_iters: 50_000,
            check_every: 10,
            polish: true,
            trace: false,
        }
    }

    pub fn noisy() -> Self {
        SolverOptions {
            tol_primal: 1e-7,
            tol_dual: 1e-7,
            ..Self::noiseless()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.tol_primal >= 0.0 && self.tol_dual >= 0.0) {
            return Err(Error::InvalidParameter("tolerances must be nonnegative".into()));
        }
        if self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::InvalidParameter("max_iters and check_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// One row of solver telemetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Splitting residual `‖v − z‖` (normalized units).
    pub primal_residual: f64,
    /// `ρ‖z − z_prev‖` (normalized units).
    pub dual_residual: f64,
    /// Objective of the current sparse iterate, original units.
    pub objective: f64,
    /// Fixed-point residual `‖z⁺ − z‖² + ‖u⁺ − u‖²`; non-increasing for a
    /// fixed penalty.
    pub merit: f64,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    /// Solution `v̂ = vec(X̂)`.
    pub v_hat: CVector,
    pub subspace_dim: usize,
    pub signal_len: usize,
    pub iterations: usize,
    /// Relative infeasibility of `v̂`: `‖Φv̂ − y‖/(1 + ‖y‖)`, or the excess
    /// over `η` for the noise-ball program.
    pub primal_residual: f64,
    /// Relative duality gap (or splitting residual for the mixed program).
    pub dual_residual: f64,
    pub converged: bool,
    pub objective: f64,
    /// Dual vector `u` with `Φ*u` a subgradient certificate for `v̂`.
    pub dual: Option<CVector>,
    /// Rank of the row space of `Φ` used by the solver.
    pub row_rank: usize,
    /// Whether `v̂` came from a least-squares re-solve on its support.
    pub polished: bool,
    pub trace: Vec<IterationRecord>,
}

impl SolverResult {
    /// `X̂` as a `k×N` matrix.
    pub fn x_hat(&self) -> CMatrix {
        CMatrix::from_column_slice(self.subspace_dim, self.signal_len, self.v_hat.as_slice())
    }

    fn zero(op: &LiftedOperator, row_rank: usize) -> Self {
        SolverResult {
            v_hat: CVector::zeros(op.lifted_len()),
            subspace_dim: op.subspace_dim(),
            signal_len: op.signal_len(),
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            converged: true,
            objective: 0.0,
            dual: Some(CVector::zeros(op.measurements())),
            row_rank,
            polished: false,
            trace: Vec::new(),
        }
    }
}

/// Which norm a sparse program minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Penalty {
    /// Entrywise `ℓ1`.
    L1,
    /// Sum of column norms of `X` (groups of `k` consecutive entries).
    L21,
}

impl Penalty {
    pub(crate) fn group(self, op: &LiftedOperator) -> usize {
        match self {
            Penalty::L1 => 1,
            Penalty::L21 => op.subspace_dim(),
        }
    }
}

/// `min Σ_j ‖X_{·,j}‖₂` subject to `Φv = y` (`eta = None` or `Some(0)`) or
/// `‖Φv − y‖ ≤ η`.
pub fn solve_l21(op: &LiftedOperator, y: &CVector, eta: Option<f64>, opts: &SolverOptions) -> Result<SolverResult> {
    match eta {
        Some(e) if e > 0.0 => ball::solve_ball(op, y, e, Penalty::L21, opts),
        Some(e) if e < 0.0 || e.is_nan() => Err(Error::InvalidParameter(format!("eta must be nonnegative, got {e}"))),
        _ => equality::solve_equality(op, y, Penalty::L21, opts),
    }
}

pub(crate) fn check_y(op: &LiftedOperator, y: &CVector) -> Result<()> {
    if y.len() != op.measurements() {
        return Err(Error::shape(format!("y of length {}", op.measurements()), format!("{}", y.len())));
    }
    Ok(())
}

/// Writes telemetry as CSV with header
/// `iteration,primal_residual,dual_residual,objective,merit`.
pub fn write_telemetry_csv(records: &[IterationRecord], path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(f, "iteration,primal_residual,dual_residual,objective,merit").map_err(io_err)?;
    for r in records {
        writeln!(
            f,
            "{},{:e},{:e},{:e},{:e}",
            r.iteration, r.primal_residual, r.dual_residual, r.objective, r.merit
        )
        .map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}
