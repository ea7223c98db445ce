use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use sparselift::certify::{self, BlockLayout, CertifyOptions};
use sparselift::experiments::{self, ExperimentConfig, ExperimentKind, ExperimentRecord, MatrixFamily, SolverKind};
use sparselift::lifting::{self, LiftedOperator};
use sparselift::problem::{Dimensions, Entries, InstanceConfig, MatrixKind, ProblemInstance};
use sparselift::recovery::{self, RecoveryResult};
use sparselift::solvers::{self, SolverOptions, SolverResult};
use sparselift::CMatrix;

#[derive(Parser)]
#[command(name = "sparselift", version, about = "Sparse recovery with unknown calibration by convex lifting")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random instance and write it as JSON.
    Generate(GenerateArgs),
    /// Solve a stored instance.
    Solve(SolveArgs),
    /// Check the sufficient recovery conditions on a stored instance.
    Certify(CertifyArgs),
    /// Success rate over (k, n) at L = 128, N = 256.
    PhaseTransition(ExperimentArgs),
    /// Smallest L reaching the target success rate along two sweeps.
    MinimalL(ExperimentArgs),
    /// Bearing estimation with an uncalibrated circular array.
    Doa(ExperimentArgs),
    /// Relative error against SNR.
    Cdma(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixArg {
    Gaussian,
    Fourier,
}

impl MatrixArg {
    fn family(self) -> MatrixFamily {
        match self {
            MatrixArg::Gaussian => MatrixFamily::Gaussian,
            MatrixArg::Fourier => MatrixFamily::Fourier,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LiftArg {
    Real,
    Complex,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SolverArg {
    Bp,
    Bpdn,
    L1Nuclear,
    L21,
}

#[derive(Clone, Copy, ValueEnum)]
enum EntriesArg {
    Real,
    Complex,
}

impl EntriesArg {
    fn entries(self) -> Entries {
        match self {
            EntriesArg::Real => Entries::Real,
            EntriesArg::Complex => Entries::Complex,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Interleaved,
    Contiguous,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "fourier")]
    matrix: MatrixArg,
    /// Number of measurements L.
    #[arg(short = 'L', long = "measurements", default_value_t = 128)]
    measurements: usize,
    /// Signal length N.
    #[arg(short = 'N', long = "signal-len", default_value_t = 256)]
    signal_len: usize,
    /// Subspace dimension k.
    #[arg(short = 'k', long = "subspace-dim", default_value_t = 3)]
    subspace_dim: usize,
    /// Sparsity n.
    #[arg(short = 'n', long, default_value_t = 3)]
    sparsity: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target SNR in dB (noiseless when absent).
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long, value_enum, default_value = "real")]
    entries: EntriesArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON written by `generate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "bp")]
    solver: SolverArg,
    /// Weight of the nuclear norm for l1-nuclear (`‖X‖₁ + λ‖X‖_*`).
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Noise-ball radius for bpdn and l21 (default: the instance's η).
    #[arg(long)]
    eta: Option<f64>,
    /// Solver iteration cap [default: 50000].
    #[arg(long)]
    max_iters: Option<usize>,
    /// Primal and duality-gap tolerance [default: 1e-9 noiseless, 1e-7 noisy].
    #[arg(long)]
    tol: Option<f64>,
    /// Search over real X only.
    #[arg(long)]
    real_lift: bool,
    /// Write X̂ and the recovery summary here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-iteration telemetry CSV here.
    #[arg(long)]
    telemetry: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    input: PathBuf,
    /// Also build the golfing certificate with blocks of this many rows.
    #[arg(long)]
    golfing_block: Option<usize>,
    #[arg(long, value_enum, default_value = "interleaved")]
    layout: LayoutArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Base seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per cell [default: 5, or 10 with --full; 10 for doa and cdma].
    #[arg(long)]
    trials: Option<usize>,
    /// Sensing matrix families, comma separated [default: gaussian,fourier for
    /// phase-transition, gaussian for minimal-l, fourier for cdma].
    #[arg(long, value_enum, value_delimiter = ',')]
    matrix: Option<Vec<MatrixArg>>,
    /// Program to solve [default: bp; bpdn for doa and cdma].
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Weight of the nuclear norm for l1-nuclear (`‖X‖₁ + λ‖X‖_*`) [default: 0.1].
    #[arg(long)]
    lambda: Option<f64>,
    /// SNR points in dB, comma separated [default: 25 for doa, 0,10,...,80 for cdma].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Option<Vec<f64>>,
    /// Relative error counted as success [default: 0.01].
    #[arg(long)]
    threshold: Option<f64>,
    /// Solver iteration cap [default: 2000; 20000 for doa and cdma].
    #[arg(long)]
    max_iters: Option<usize>,
    /// Field of the lifted unknown [default: real for phase-transition,
    /// complex otherwise].
    #[arg(long, value_enum)]
    lift: Option<LiftArg>,
    /// Paper-scale grid instead of the scaled default.
    #[arg(long)]
    full: bool,
    /// JSON file with any subset of the config fields; flags win.
    #[arg(long)]
    config_file: Option<PathBuf>,
    /// Results CSV; a `.json` sidecar with the config is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Solve(a) => solve(&a),
        Command::Certify(a) => certify_cmd(&a),
        Command::PhaseTransition(a) => experiment(ExperimentKind::PhaseTransition, &a),
        Command::MinimalL(a) => experiment(ExperimentKind::MinimalL, &a),
        Command::Doa(a) => experiment(ExperimentKind::Doa, &a),
        Command::Cdma(a) => experiment(ExperimentKind::Cdma, &a),
    }
}

fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let inst = ProblemInstance::load(path)?;
    inst.validate().with_context(|| format!("{}", path.display()))?;
    Ok(inst)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    fs::write(path, s + "\n").with_context(|| format!("writing {}", path.display()))
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let dims = Dimensions::new(a.measurements, a.signal_len, a.subspace_dim, a.sparsity)?;
    let matrix = match a.matrix {
        MatrixArg::Gaussian => MatrixKind::Gaussian,
        MatrixArg::Fourier => MatrixKind::Fourier,
    };
    let cfg = InstanceConfig {
        dims,
        matrix,
        h_entries: a.entries.entries(),
        x_entries: a.entries.entries(),
        snr_db: a.snr_db,
    };
    let inst = ProblemInstance::generate(&cfg, a.seed)?;
    inst.save(&a.out)?;
    println!("wrote {} (eta = {:.6e})", a.out.display(), inst.eta);
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    solver: &'a str,
    iterations: usize,
    converged: bool,
    primal_residual: f64,
    dual_residual: f64,
    objective: f64,
    rel_error: f64,
    recovery: &'a RecoveryResult,
    #[serde(with = "sparselift::serde_complex::matrix")]
    x_hat: &'a CMatrix,
}

fn solve(a: &SolveArgs) -> Result<()> {
    let inst = load_instance(&a.input)?;
    let op = LiftedOperator::build(&inst.a, &inst.b)?;
    let mut opts = if inst.is_noiseless() { SolverOptions::noiseless() } else { SolverOptions::noisy() };
    if let Some(m) = a.max_iters {
        opts.max_iters = m;
    }
    if let Some(t) = a.tol {
        opts.tol_primal = t;
        opts.tol_dual = t;
    }
    opts.trace = a.telemetry.is_some();
    let eta = a.eta.unwrap_or(inst.eta);
    let (op, y) = if a.real_lift {
        (op.realified(), lifting::realify_measurements(&inst.y))
    } else {
        (op, inst.y.clone())
    };
    let (name, result): (&str, SolverResult) = match a.solver {
        SolverArg::Bp => ("bp", solvers::solve_bp(&op, &y, &opts)?),
        SolverArg::Bpdn => ("bpdn", solvers::solve_bpdn(&op, &y, eta, &opts)?),
        SolverArg::L1Nuclear => ("l1_nuclear", solvers::solve_mixed(&op, &y, a.lambda, 1.0, &opts)?),
        SolverArg::L21 => ("l21", solvers::solve_l21(&op, &y, Some(eta), &opts)?),
    };
    let x_hat = result.x_hat();
    let rec = recovery::recover(&x_hat, &inst.h0, &inst.x0)?;
    println!("solver = {name}");
    println!("iterations = {}", result.iterations);
    println!("converged = {}", result.converged);
    println!("rel_error = {:.6e}", rec.rel_error);
    println!("err_h = {:.6e}", rec.err_h);
    println!("err_x = {:.6e}", rec.err_x);
    if let Some(path) = &a.telemetry {
        solvers::write_telemetry_csv(&result.trace, path)?;
    }
    if let Some(path) = &a.out {
        let out = SolveOutput {
            solver: name,
            iterations: result.iterations,
            converged: result.converged,
            primal_residual: result.primal_residual,
            dual_residual: result.dual_residual,
            objective: result.objective,
            rel_error: rec.rel_error,
            recovery: &rec,
            x_hat: &x_hat,
        };
        write_json(path, &out)?;
    }
    Ok(())
}

fn certify_cmd(a: &CertifyArgs) -> Result<()> {
    let inst = load_instance(&a.input)?;
    let op = LiftedOperator::build(&inst.a, &inst.b)?;
    let opts = CertifyOptions {
        golfing_block: a.golfing_block,
        layout: match a.layout {
            LayoutArg::Interleaved => BlockLayout::Interleaved,
            LayoutArg::Contiguous => BlockLayout::Contiguous,
        },
    };
    let report = certify::certify_instance_with(&op, &inst, &opts)?;
    let ls = &report.least_squares;
    println!("delta = {:.6e}", ls.delta);
    println!("gamma = {:.6e}", ls.gamma);
    println!("q_on_support_err = {:.3e}", ls.q_on_support_err);
    println!("q_off_support_inf = {:.6}", ls.q_off_support_inf);
    println!("passed = {}", report.passed);
    if let Some(g) = &report.golfing {
        println!("golfing_off_support_inf = {:.6}", g.q_off_support_inf);
        println!("golfing_passed = {}", g.passed);
    }
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    Ok(())
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn build_config(kind: ExperimentKind, a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let file: Option<Value> = match &a.config_file {
        Some(p) => {
            let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let v: Value = serde_json::from_str(&s).with_context(|| format!("parsing {}", p.display()))?;
            if !v.is_object() {
                bail!("{}: config must be a JSON object", p.display());
            }
            Some(v)
        }
        None => None,
    };
    let file_full = file.as_ref().and_then(|v| v.get("full")).and_then(Value::as_bool).unwrap_or(false);
    let mut value = serde_json::to_value(ExperimentConfig::defaults(kind, a.full || file_full))?;
    if let Some(mut f) = file {
        if let Some(k) = f.get("kind") {
            if k != kind.name() {
                bail!("config file is for {k}, not {}", kind.name());
            }
        }
        f.as_object_mut().map(|o| o.remove("kind"));
        merge(&mut value, f);
    }
    let mut cfg: ExperimentConfig = serde_json::from_value(value).context("invalid config")?;
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(m) = &a.matrix {
        cfg.matrices = m.iter().map(|m| m.family()).collect();
    }
    let lambda = match (a.lambda, cfg.solver) {
        (Some(l), _) => l,
        (None, SolverKind::L1Nuclear { lambda }) => lambda,
        (None, _) => 0.1,
    };
    match a.solver {
        Some(SolverArg::Bp) => cfg.solver = SolverKind::Bp,
        Some(SolverArg::Bpdn) => cfg.solver = SolverKind::Bpdn,
        Some(SolverArg::L1Nuclear) => cfg.solver = SolverKind::L1Nuclear { lambda },
        Some(SolverArg::L21) => cfg.solver = SolverKind::L21,
        None => {
            if let SolverKind::L1Nuclear { .. } = cfg.solver {
                cfg.solver = SolverKind::L1Nuclear { lambda };
            } else if a.lambda.is_some() {
                bail!("--lambda only applies to --solver l1-nuclear");
            }
        }
    }
    if let Some(s) = &a.snr_db {
        cfg.snr_db = s.clone();
    }
    if let Some(l) = a.lift {
        cfg.real_lift = l == LiftArg::Real;
    }
    if let Some(t) = a.threshold {
        cfg.success_threshold = t;
    }
    if let Some(m) = a.max_iters {
        cfg.solver_options.max_iters = m;
    }
    if a.full {
        cfg.full = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn experiment(kind: ExperimentKind, a: &ExperimentArgs) -> Result<()> {
    let cfg = build_config(kind, a)?;
    eprintln!("running {} with solver {} ({} trials per cell)", kind.name(), cfg.solver.name(), cfg.trials);
    let records = experiments::run(&cfg)?;
    if let Some(path) = &a.out {
        experiments::write_results(&records, path, &cfg)?;
        eprintln!("wrote {} records to {}", records.len(), path.display());
    }
    print_summary(&cfg, &records);
    Ok(())
}

fn print_summary(cfg: &ExperimentConfig, records: &[ExperimentRecord]) {
    match cfg.kind {
        ExperimentKind::PhaseTransition => {
            for s in experiments::phase_transition_summary(records) {
                println!("# {} success rate, rows k, columns n", s.matrix.name());
                for &k in &cfg.k_values {
                    let row: Vec<String> = cfg
                        .n_values
                        .iter()
                        .map(|&n| {
                            s.cells
                                .iter()
                                .find(|c| c.k == k && c.n == n)
                                .map_or("-".into(), |c| format!("{:.2}", c.success_rate))
                        })
                        .collect();
                    println!("k={k:>2}: {}", row.join(" "));
                }
                let fmt = |r: Option<f64>| r.map_or("n/a".into(), |r| format!("{r:.3}"));
                println!("mean rate kn<=40: {}", fmt(s.region_rate(|kn| kn <= 40)));
                println!("mean rate kn>=150: {}", fmt(s.region_rate(|kn| kn >= 150)));
            }
        }
        ExperimentKind::MinimalL => {
            for s in experiments::minimal_l_summary(records, cfg.min_success_rate) {
                println!("# {} {:?}", s.matrix.name(), s.sweep);
                for p in &s.points {
                    let show = |v: Option<usize>| v.map_or("none".into(), |v| v.to_string());
                    println!("k={:>2} n={:>2} kn={:>3} L_min={} monotone={}", p.k, p.n, p.kn, show(p.l_min), show(p.l_min_monotone));
                }
                match s.fit {
                    Some(f) => println!("fit: L_min = {:.3} kn + {:.2}, R^2 = {:.4}", f.slope, f.intercept, f.r2),
                    None => println!("fit: not enough points"),
                }
            }
        }
        ExperimentKind::Doa => {
            for s in experiments::doa_summary(records, cfg.angle_tolerance) {
                let snr = s.snr_db.map_or("noiseless".into(), |v| format!("{v} dB"));
                println!(
                    "SNR {snr}: {}/{} trials within {} deg, max error {:.2} deg",
                    s.hits, s.trials, cfg.angle_tolerance, s.max_angle_error
                );
            }
        }
        ExperimentKind::Cdma => {
            for s in experiments::cdma_summary(records, 20.0, 60.0) {
                println!("# {}: snr_db avg_rel_error mse_db max_bound_ratio", s.matrix.name());
                for p in &s.points {
                    println!("{:>5} {:.4e} {:>8.2} {:.3}", p.snr_db, p.avg_rel_error, p.mse_db, p.max_bound_ratio);
                }
                if let Some(f) = s.mse_fit {
                    println!("slope of mse_db over 20-60 dB: {:.4}", f.slope);
                }
                if let Some(f) = s.rel_error_fit {
                    println!("slope of 10log10(avg_rel_error) over 20-60 dB: {:.4}", f.slope);
                }
            }
        }
    }
}
