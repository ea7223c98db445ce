//! Seeded drivers for the four numerical studies: phase transition over
//! `(k, n)`, minimal number of measurements, direction of arrival, and CDMA
//! noise robustness.
//!
//! Every trial draws from its own seed, derived from the base seed and the
//! trial's cell coordinates, so results do not depend on scheduling.

mod config;
mod io;
mod summary;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, ExperimentKind, LSearch, MatrixFamily, SolverKind, Sweep};
pub use io::{read_results, sidecar_path, write_results, CSV_HEADER};
pub use summary::{
    cdma_summary, doa_summary, linear_fit, minimal_l_summary, phase_transition_summary, summarize_cells, CdmaPoint, CdmaSummary,
    CellSummary, DoaSummary, LinearFit, MinimalLPoint, MinimalLSummary, PhaseTransitionSummary,
};

use crate::error::{Error, Result};
use crate::lifting::{self, LiftedOperator};
use crate::problem::{self, Dimensions, Entries, InstanceConfig, ProblemInstance};
use crate::recovery;
use crate::seed;
use crate::solvers::{self, SolverResult};
use crate::{CVector, Complex64};

/// One solved trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub kind: ExperimentKind,
    pub matrix: MatrixFamily,
    pub sweep: Option<Sweep>,
    pub k: usize,
    pub n: usize,
    pub l: usize,
    pub snr_db: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    /// `‖X̂ − X₀‖_F / ‖X₀‖_F`; NaN when the solver failed outright.
    pub rel_error: f64,
    /// `‖X̂ − X₀‖_F`.
    pub abs_error: f64,
    pub eta: f64,
    pub success: bool,
    pub converged: bool,
    pub iterations: usize,
    /// Largest bearing error in degrees (DOA only).
    pub angle_error: Option<f64>,
    pub wall_ms: f64,
}

/// Coordinates of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    matrix: MatrixFamily,
    sweep: Option<Sweep>,
    k: usize,
    n: usize,
    l: usize,
    snr_db: Option<f64>,
}

fn trial_seed(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> u64 {
    seed::mix(
        cfg.base_seed,
        &[
            cfg.kind.code(),
            cell.matrix.code(),
            cell.sweep.map_or(0, Sweep::code),
            cell.k as u64,
            cell.n as u64,
            cell.l as u64,
            cell.snr_db.map_or(u64::MAX, f64::to_bits),
            trial as u64,
        ],
    )
}

fn snr_points(cfg: &ExperimentConfig) -> Vec<Option<f64>> {
    if cfg.snr_db.is_empty() {
        vec![None]
    } else {
        cfg.snr_db.iter().map(|&s| Some(s)).collect()
    }
}

/// Runs whichever study `cfg.kind` names.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    match cfg.kind {
        ExperimentKind::PhaseTransition => run_phase_transition(cfg),
        ExperimentKind::MinimalL => run_minimal_l(cfg),
        ExperimentKind::Doa => run_doa(cfg),
        ExperimentKind::Cdma => run_cdma(cfg),
    }
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::InvalidParameter(format!("expected a {} config, got {}", kind.name(), cfg.kind.name())));
    }
    cfg.validate()
}

/// Success rate over `(k, n)` at fixed `L`, `N`.
pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    expect_kind(cfg, ExperimentKind::PhaseTransition)?;
    run_grid(cfg)
}

/// Relative error against SNR.
pub fn run_cdma(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    expect_kind(cfg, ExperimentKind::Cdma)?;
    run_grid(cfg)
}

/// Bearing estimation with an uncalibrated circular array.
pub fn run_doa(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    expect_kind(cfg, ExperimentKind::Doa)?;
    run_grid(cfg)
}

/// Matrix × k × n × SNR × trial, in that nesting order.
fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    let mut jobs = Vec::new();
    for &matrix in &cfg.matrices {
        for &k in &cfg.k_values {
            for n in sparsity_axis(cfg) {
                for snr_db in snr_points(cfg) {
                    let cell = Cell {
                        matrix,
                        sweep: None,
                        k,
                        n,
                        l: cfg.measurements,
                        snr_db,
                    };
                    jobs.extend((0..cfg.trials).map(|t| (cell, t)));
                }
            }
        }
    }
    jobs.par_iter().map(|(cell, t)| run_trial(cfg, cell, *t)).collect()
}

// DOA sparsity is the number of sources, not a grid axis.
fn sparsity_axis(cfg: &ExperimentConfig) -> Vec<usize> {
    if cfg.kind == ExperimentKind::Doa {
        vec![cfg.source_angles.len()]
    } else {
        cfg.n_values.clone()
    }
}

/// Per-`(k, n)` search for the smallest `L` reaching the target success
/// rate, along the fixed-`k` and fixed-`n` sweeps.
pub fn run_minimal_l(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    expect_kind(cfg, ExperimentKind::MinimalL)?;
    let mut cells = Vec::new();
    for &matrix in &cfg.matrices {
        for &n in &cfg.n_values {
            cells.push((matrix, Sweep::FixedK, cfg.sweep_fixed, n));
        }
        for &k in &cfg.k_values {
            cells.push((matrix, Sweep::FixedN, k, cfg.sweep_fixed));
        }
    }
    let per_cell: Vec<Vec<ExperimentRecord>> = cells
        .par_iter()
        .map(|&(matrix, sweep, k, n)| minimal_l_cell(cfg, matrix, sweep, k, n))
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

fn minimal_l_cell(cfg: &ExperimentConfig, matrix: MatrixFamily, sweep: Sweep, k: usize, n: usize) -> Result<Vec<ExperimentRecord>> {
    // B needs k ≤ L columns.
    let mut grid: Vec<usize> = cfg.l_values.iter().copied().filter(|&l| l >= k).collect();
    grid.sort_unstable();
    grid.dedup();
    let cell = |l| Cell {
        matrix,
        sweep: Some(sweep),
        k,
        n,
        l,
        snr_db: None,
    };
    let mut records = Vec::new();
    match cfg.l_search {
        LSearch::Scan => {
            for &l in &grid {
                for t in 0..cfg.trials {
                    records.push(run_trial(cfg, &cell(l), t)?);
                }
            }
        }
        LSearch::Bisection => {
            let allowed = cfg.trials - (cfg.min_success_rate * cfg.trials as f64 - 1e-9).ceil() as usize;
            let probe = |l: usize, records: &mut Vec<ExperimentRecord>| -> Result<bool> {
                let mut failures = 0;
                for t in 0..cfg.trials {
                    let r = run_trial(cfg, &cell(l), t)?;
                    failures += usize::from(!r.success);
                    records.push(r);
                    if failures > allowed {
                        return Ok(false);
                    }
                }
                Ok(true)
            };
            if let Some(&top) = grid.last() {
                if probe(top, &mut records)? {
                    let (mut lo, mut hi) = (0, grid.len() - 1);
                    while lo < hi {
                        let mid = (lo + hi) / 2;
                        if probe(grid[mid], &mut records)? {
                            hi = mid;
                        } else {
                            lo = mid + 1;
                        }
                    }
                }
            }
            records.sort_by_key(|r| (r.l, r.trial));
        }
    }
    Ok(records)
}

fn build_instance(cfg: &ExperimentConfig, cell: &Cell, seed: u64) -> Result<ProblemInstance> {
    if cell.matrix != MatrixFamily::CircularArray {
        let dims = Dimensions::new(cell.l, cfg.signal_len, cell.k, cell.n)?;
        let icfg = InstanceConfig {
            dims,
            matrix: cell.matrix.matrix_kind()?,
            h_entries: cfg.h_entries,
            x_entries: cfg.x_entries,
            snr_db: cell.snr_db,
        };
        return ProblemInstance::generate(&icfg, seed);
    }
    // Coherent on-grid sources of equal power with random phases.
    let grid = cfg.angle_grid();
    let a = problem::gen_circular_array_a(cell.l, &grid, cfg.spacing)?;
    let b = problem::gen_dft_b(cell.l, cell.k)?;
    let h0 = problem::gen_dense_h(cell.k, seed::mix(seed, &[1]), cfg.h_entries);
    let mut rng = seed::rng(seed::mix(seed, &[2]));
    let mut x0 = CVector::zeros(grid.len());
    for j in cfg.source_indices()? {
        x0[j] = match cfg.x_entries {
            Entries::Complex => Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)),
            Entries::Real => Complex64::new(if rng.random_bool(0.5) { 1.0 } else { -1.0 }, 0.0),
        };
    }
    let clean = problem::measure(&a, &b, &h0, &x0, None)?;
    let noisy = problem::add_noise_snr(&clean, cell.snr_db.unwrap_or(f64::INFINITY), h0.norm() * x0.norm(), seed::mix(seed, &[3]))?;
    ProblemInstance::from_parts(a, b, h0, x0, Some(noisy.w), noisy.eta)
}

fn solve(cfg: &ExperimentConfig, op: &LiftedOperator, inst: &ProblemInstance) -> Result<SolverResult> {
    let opts = &cfg.solver_options;
    let real = cfg.real_lift.then(|| (op.realified(), lifting::realify_measurements(&inst.y)));
    let (op, y) = match &real {
        Some((op, y)) => (op, y),
        None => (op, &inst.y),
    };
    match cfg.solver {
        SolverKind::Bp => solvers::solve_bp(op, y, opts),
        SolverKind::Bpdn => solvers::solve_bpdn(op, y, inst.eta, opts),
        SolverKind::L1Nuclear { lambda } => solvers::solve_mixed(op, y, lambda, 1.0, opts),
        SolverKind::L21 => solvers::solve_l21(op, y, Some(inst.eta), opts),
    }
}

/// Largest error between sorted detected and true bearings.
fn angle_error(cfg: &ExperimentConfig, result: &SolverResult) -> f64 {
    let (_, x_hat, _) = match recovery::extract_rank_one(&result.x_hat()) {
        Ok(f) => f,
        Err(_) => return f64::INFINITY,
    };
    let mut truth = cfg.source_angles.clone();
    truth.sort_by(f64::total_cmp);
    match recovery::detect_angles(x_hat.as_slice(), &cfg.angle_grid(), truth.len()) {
        Ok(found) if found.len() == truth.len() => found.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        _ => f64::INFINITY,
    }
}

fn run_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> Result<ExperimentRecord> {
    let seed = trial_seed(cfg, cell, trial);
    let start = Instant::now();
    let inst = build_instance(cfg, cell, seed)?;
    let op = LiftedOperator::build(&inst.a, &inst.b)?;
    let x0 = inst.x0_matrix();
    let x0_norm = x0.norm();
    let mut rec = ExperimentRecord {
        kind: cfg.kind,
        matrix: cell.matrix,
        sweep: cell.sweep,
        k: cell.k,
        n: cell.n,
        l: cell.l,
        snr_db: cell.snr_db,
        trial,
        seed,
        rel_error: f64::NAN,
        abs_error: f64::NAN,
        eta: inst.eta,
        success: false,
        converged: false,
        iterations: 0,
        angle_error: None,
        wall_ms: 0.0,
    };
    // A solver failure is a failed trial, not a failed study.
    if let Ok(result) = solve(cfg, &op, &inst) {
        let abs = (result.x_hat() - &x0).norm();
        rec.abs_error = abs;
        rec.rel_error = abs / x0_norm;
        rec.success = rec.rel_error <= cfg.success_threshold;
        rec.converged = result.converged;
        rec.iterations = result.iterations;
        if cfg.kind == ExperimentKind::Doa {
            rec.angle_error = Some(angle_error(cfg, &result));
        }
    } else if cfg.kind == ExperimentKind::Doa {
        rec.angle_error = Some(f64::INFINITY);
    }
    rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(rec)
}
