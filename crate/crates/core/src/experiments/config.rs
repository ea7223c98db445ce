use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Entries, MatrixKind};
use crate::solvers::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PhaseTransition,
    MinimalL,
    Doa,
    Cdma,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PhaseTransition => "phase_transition",
            ExperimentKind::MinimalL => "minimal_l",
            ExperimentKind::Doa => "doa",
            ExperimentKind::Cdma => "cdma",
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            ExperimentKind::PhaseTransition => 1,
            ExperimentKind::MinimalL => 2,
            ExperimentKind::Doa => 3,
            ExperimentKind::Cdma => 4,
        }
    }
}

/// Random sensing-matrix family for the synthetic studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFamily {
    Gaussian,
    Fourier,
    /// Uniform circular array manifold (DOA only).
    CircularArray,
}

impl MatrixFamily {
    pub fn name(self) -> &'static str {
        match self {
            MatrixFamily::Gaussian => "gaussian",
            MatrixFamily::Fourier => "fourier",
            MatrixFamily::CircularArray => "circular_array",
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            MatrixFamily::Gaussian => 1,
            MatrixFamily::Fourier => 2,
            MatrixFamily::CircularArray => 3,
        }
    }

    pub(crate) fn matrix_kind(self) -> Result<MatrixKind> {
        match self {
            MatrixFamily::Gaussian => Ok(MatrixKind::Gaussian),
            MatrixFamily::Fourier => Ok(MatrixKind::Fourier),
            MatrixFamily::CircularArray => Err(Error::InvalidParameter("circular array is only used by the doa experiment".into())),
        }
    }
}

/// Convex program used for each trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "program", rename_all = "snake_case")]
pub enum SolverKind {
    Bp,
    Bpdn,
    /// `min ‖X‖₁ + λ‖X‖_*`.
    L1Nuclear { lambda: f64 },
    L21,
}

impl SolverKind {
    pub fn name(&self) -> String {
        match self {
            SolverKind::Bp => "bp".into(),
            SolverKind::Bpdn => "bpdn".into(),
            SolverKind::L1Nuclear { lambda } => format!("l1_nuclear({lambda})"),
            SolverKind::L21 => "l21".into(),
        }
    }
}

/// Which parameter a minimal-L sweep holds fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// `k` fixed, `n` varies.
    FixedK,
    /// `n` fixed, `k` varies.
    FixedN,
}

impl Sweep {
    pub(crate) fn code(self) -> u64 {
        match self {
            Sweep::FixedK => 1,
            Sweep::FixedN => 2,
        }
    }
}

/// How the minimal-L driver walks the `L` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LSearch {
    /// Every grid value, every trial.
    Scan,
    /// Binary search for the first passing grid value; a probe stops as
    /// soon as the success-rate target is out of reach.
    Bisection,
}

/// Everything needed to reproduce one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub base_seed: u64,
    /// Trials per cell.
    pub trials: usize,
    pub matrices: Vec<MatrixFamily>,
    pub solver: SolverKind,
    /// A trial succeeds when its relative error is at most this.
    pub success_threshold: f64,
    /// `L` for fixed-`L` studies.
    pub measurements: usize,
    /// `N`.
    pub signal_len: usize,
    pub k_values: Vec<usize>,
    pub n_values: Vec<usize>,
    /// `L` grid of the minimal-L study.
    pub l_values: Vec<usize>,
    /// SNR points in dB; empty means noiseless.
    pub snr_db: Vec<f64>,
    /// Value held fixed along each minimal-L sweep.
    pub sweep_fixed: usize,
    pub l_search: LSearch,
    /// Success rate that counts a minimal-L cell as passing.
    pub min_success_rate: f64,
    /// DOA grid in degrees: `grid_start, grid_start + grid_step, ..., ≤ grid_end`.
    pub grid_start: f64,
    pub grid_end: f64,
    pub grid_step: f64,
    /// Array element spacing in wavelengths.
    pub spacing: f64,
    /// True DOA bearings in degrees; must lie on the grid.
    pub source_angles: Vec<f64>,
    /// Largest per-source angle error counted as a hit.
    pub angle_tolerance: f64,
    pub h_entries: Entries,
    pub x_entries: Entries,
    pub solver_options: SolverOptions,
    /// Search over real `X` only (stacked real and imaginary parts of `Φ`).
    /// Needs real `h₀` and `x₀`.
    #[serde(default)]
    pub real_lift: bool,
    /// Paper-scale grids instead of the scaled defaults.
    pub full: bool,
}

fn experiment_options() -> SolverOptions {
    SolverOptions {
        tol_primal: 1e-6,
        tol_dual: 1e-6,
        max_iters: 2000,
        ..SolverOptions::noiseless()
    }
}

fn odd_or_all(full: bool) -> Vec<usize> {
    if full {
        (1..=15).collect()
    } else {
        (1..=15).step_by(2).collect()
    }
}

impl ExperimentConfig {
    /// Defaults for `kind`; `full` selects the paper-scale grid.
    pub fn defaults(kind: ExperimentKind, full: bool) -> Self {
        let base = ExperimentConfig {
            kind,
            base_seed: 0,
            trials: if full { 10 } else { 5 },
            matrices: vec![MatrixFamily::Gaussian, MatrixFamily::Fourier],
            solver: SolverKind::Bp,
            success_threshold: 0.01,
            measurements: 128,
            signal_len: 256,
            k_values: odd_or_all(full),
            n_values: odd_or_all(full),
            l_values: Vec::new(),
            snr_db: Vec::new(),
            sweep_fixed: 5,
            l_search: LSearch::Scan,
            min_success_rate: 0.9,
            grid_start: -90.0,
            grid_end: 89.0,
            grid_step: 1.0,
            spacing: 0.5,
            source_angles: vec![-10.0, 5.0, 20.0],
            angle_tolerance: 1.0,
            h_entries: Entries::Real,
            x_entries: Entries::Real,
            solver_options: experiment_options(),
            real_lift: false,
            full,
        };
        match kind {
            ExperimentKind::PhaseTransition => ExperimentConfig { real_lift: true, ..base },
            ExperimentKind::MinimalL => ExperimentConfig {
                matrices: vec![MatrixFamily::Gaussian],
                signal_len: 512,
                k_values: (1..=15).collect(),
                n_values: (1..=15).collect(),
                l_values: if full { (10..=400).step_by(10).collect() } else { (20..=400).step_by(20).collect() },
                l_search: if full { LSearch::Scan } else { LSearch::Bisection },
                ..base
            },
            ExperimentKind::Doa => ExperimentConfig {
                trials: 10,
                matrices: vec![MatrixFamily::CircularArray],
                solver: SolverKind::Bpdn,
                measurements: 64,
                signal_len: 180,
                k_values: vec![4],
                n_values: vec![3],
                snr_db: vec![25.0],
                h_entries: Entries::Complex,
                x_entries: Entries::Complex,
                solver_options: SolverOptions {
                    max_iters: 20_000,
                    ..experiment_options()
                },
                ..base
            },
            ExperimentKind::Cdma => ExperimentConfig {
                trials: 10,
                matrices: vec![MatrixFamily::Fourier],
                solver: SolverKind::Bpdn,
                k_values: vec![5],
                n_values: vec![5],
                snr_db: (0..=8).map(|i| 10.0 * i as f64).collect(),
                solver_options: SolverOptions {
                    tol_primal: 1e-7,
                    tol_dual: 1e-7,
                    max_iters: 20_000,
                    ..experiment_options()
                },
                ..base
            },
        }
    }

    /// DOA bearing grid.
    pub fn angle_grid(&self) -> Vec<f64> {
        let count = ((self.grid_end - self.grid_start) / self.grid_step + 1e-9).floor();
        if !(count >= 0.0) {
            return Vec::new();
        }
        (0..=count as usize).map(|i| self.grid_start + i as f64 * self.grid_step).collect()
    }

    /// Grid indices of the DOA sources.
    pub fn source_indices(&self) -> Result<Vec<usize>> {
        let grid = self.angle_grid();
        self.source_angles
            .iter()
            .map(|&a| {
                grid.iter()
                    .position(|&g| (g - a).abs() <= 1e-9 * self.grid_step.abs().max(1.0))
                    .ok_or_else(|| Error::InvalidParameter(format!("source angle {a} is not on the grid")))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.matrices.is_empty() {
            return bad("no matrix family selected".into());
        }
        if !(self.success_threshold > 0.0) {
            return bad(format!("success threshold must be positive, got {}", self.success_threshold));
        }
        if let SolverKind::L1Nuclear { lambda } = self.solver {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return bad(format!("lambda must be positive, got {lambda}"));
            }
        }
        if self.snr_db.iter().any(|s| s.is_nan()) {
            return bad("SNR values must not be NaN".into());
        }
        self.solver_options.validate()?;
        if self.real_lift && (self.kind == ExperimentKind::Doa || self.h_entries == Entries::Complex || self.x_entries == Entries::Complex) {
            return bad("real_lift needs real h and x".into());
        }
        let nonempty = |name: &str, v: &[usize]| {
            if v.is_empty() || v.contains(&0) {
                Err(Error::InvalidParameter(format!("{name} must be a nonempty list of positive values")))
            } else {
                Ok(())
            }
        };
        let circular = self.matrices.contains(&MatrixFamily::CircularArray);
        match self.kind {
            ExperimentKind::PhaseTransition | ExperimentKind::Cdma => {
                nonempty("k_values", &self.k_values)?;
                nonempty("n_values", &self.n_values)?;
                if circular {
                    return bad("circular array is only used by the doa experiment".into());
                }
                if self.kind == ExperimentKind::Cdma && self.snr_db.is_empty() {
                    return bad("cdma needs at least one SNR point".into());
                }
            }
            ExperimentKind::MinimalL => {
                nonempty("k_values", &self.k_values)?;
                nonempty("n_values", &self.n_values)?;
                nonempty("l_values", &self.l_values)?;
                if self.sweep_fixed == 0 {
                    return bad("sweep_fixed must be >= 1".into());
                }
                if circular {
                    return bad("circular array is only used by the doa experiment".into());
                }
                if !(self.min_success_rate > 0.0 && self.min_success_rate <= 1.0) {
                    return bad(format!("min_success_rate must be in (0, 1], got {}", self.min_success_rate));
                }
            }
            ExperimentKind::Doa => {
                if self.matrices != [MatrixFamily::CircularArray] {
                    return bad("doa uses the circular array only".into());
                }
                nonempty("k_values", &self.k_values)?;
                if !(self.grid_step > 0.0) || self.angle_grid().is_empty() {
                    return bad("empty angle grid".into());
                }
                if self.source_angles.is_empty() {
                    return bad("no source angles".into());
                }
                if self.snr_db.is_empty() {
                    return bad("doa needs at least one SNR point (use inf for noiseless)".into());
                }
                self.source_indices()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in [ExperimentKind::PhaseTransition, ExperimentKind::MinimalL, ExperimentKind::Doa, ExperimentKind::Cdma] {
            for full in [false, true] {
                ExperimentConfig::defaults(kind, full).validate().unwrap();
            }
        }
    }

    #[test]
    fn scaled_grid_is_odd_values() {
        let c = ExperimentConfig::defaults(ExperimentKind::PhaseTransition, false);
        assert_eq!(c.k_values, vec![1, 3, 5, 7, 9, 11, 13, 15]);
        assert_eq!(c.trials, 5);
        let f = ExperimentConfig::defaults(ExperimentKind::PhaseTransition, true);
        assert_eq!(f.k_values.len(), 15);
        assert_eq!(f.trials, 10);
    }

    #[test]
    fn doa_grid() {
        let c = ExperimentConfig::defaults(ExperimentKind::Doa, false);
        let g = c.angle_grid();
        assert_eq!(g.len(), 180);
        assert_eq!(g[0], -90.0);
        assert_eq!(g[179], 89.0);
        assert_eq!(c.source_indices().unwrap(), vec![80, 95, 110]);
    }

    #[test]
    fn rejects_empty_ranges() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::PhaseTransition, false);
        c.k_values.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::PhaseTransition, false);
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::Doa, false);
        c.source_angles = vec![0.5];
        assert!(c.validate().is_err());
    }

    #[test]
    fn real_lift_needs_real_data() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::PhaseTransition, false);
        assert!(c.real_lift);
        assert!(c.validate().is_ok());
        c.x_entries = Entries::Complex;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::Doa, false);
        c.real_lift = true;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Cdma, false);
        c.solver = SolverKind::L1Nuclear { lambda: 0.1 };
        let s = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
