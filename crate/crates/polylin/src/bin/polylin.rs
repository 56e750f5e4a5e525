//! Experiment driver: run strategy grids on the simulated cluster, print
//! analytic cost predictions, generate problems, and size iteration counts.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use polylin::bench::{
    emit_report, generate_problem, generate_problem_exact, load_float_problem, run_experiment,
    write_report_file, Axis, CastKind, ClusterSpec, ExperimentConfig, ProblemSpec, ReportFormat,
    StrategySpec,
};
use polylin::linalg::{
    matrix_as_vector, read_matrix_file, spectral_radius_estimate, vector_as_matrix,
    write_matrix_file, Vector,
};
use polylin::scalar::{Backend, Rational, Scalar};
use polylin::sim::{predicted_costs, StragglerModel, Strategy};
use polylin::solver::{
    contraction_warning, fixed_point, required_iterations, ErrorBoundInputs, IterationSystem,
};

#[derive(Parser)]
#[command(
    name = "polylin",
    about = "Coded distributed iterative linear-inverse solvers on a simulated cluster",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and emit a CSV/JSON report.
    ///
    /// Exits 0 only if every row passes the oracle-equality check.
    Run(RunArgs),
    /// Print the closed-form cost ledger for one strategy.
    Predict(PredictArgs),
    /// Generate a random problem and write its matrices as text files.
    Gen(GenArgs),
    /// Estimate the iteration count needed to reach a target error.
    Bound(BoundArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags below override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the strategy list with this single strategy.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Problem size (generator problems only).
    #[arg(long = "N")]
    n_dim: Option<usize>,
    /// Split factor for coded strategies.
    #[arg(long)]
    m: Option<usize>,
    /// Iteration count.
    #[arg(long)]
    n: Option<usize>,
    /// Phase count for the multi-round strategy.
    #[arg(long)]
    ell: Option<usize>,
    /// Worker count.
    #[arg(long = "P")]
    p: Option<usize>,
    /// Expected recovery threshold (validated against the derived value).
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    /// Seed for both the problem generator and the cluster.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Target spectral radius for generated problems.
    #[arg(long)]
    target_rho: Option<f64>,
    /// Simulated seconds per scalar multiply.
    #[arg(long)]
    compute_rate: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long = "N")]
    n_dim: usize,
    #[arg(long = "P")]
    p: usize,
    /// Recovery threshold; defaults to P for the baseline.
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    ell: usize,
    #[arg(long, default_value_t = 1.0)]
    beta1: f64,
    #[arg(long, default_value_t = 0.01)]
    beta2: f64,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long = "N")]
    n_dim: usize,
    #[arg(long, default_value_t = 0.5)]
    target_rho: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BackendArg::Float)]
    backend: BackendArg,
    /// Directory for a.txt, q.txt, y.txt, x0.txt.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    /// Problem files (a, q, y, optional x0); omit to use the generator.
    #[arg(long)]
    a: Option<PathBuf>,
    #[arg(long)]
    q: Option<PathBuf>,
    #[arg(long)]
    y: Option<PathBuf>,
    #[arg(long)]
    x0: Option<PathBuf>,
    #[arg(long = "N", default_value_t = 8)]
    n_dim: usize,
    #[arg(long, default_value_t = 0.5)]
    target_rho: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Target error for the bound.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StrategyArg {
    Baseline,
    Polylin,
    Mrpolylin,
}

impl From<StrategyArg> for Strategy {
    fn from(v: StrategyArg) -> Strategy {
        match v {
            StrategyArg::Baseline => Strategy::Baseline,
            StrategyArg::Polylin => Strategy::Polylin,
            StrategyArg::Mrpolylin => Strategy::Mrpolylin,
        }
    }
}

#[derive(Clone, Copy, PartialEq, clap::ValueEnum)]
enum BackendArg {
    Exact,
    Float,
}

impl From<BackendArg> for Backend {
    fn from(v: BackendArg) -> Backend {
        match v {
            BackendArg::Exact => Backend::Exact,
            BackendArg::Float => Backend::Float,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(v: FormatArg) -> ReportFormat {
        match v {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Predict(args) => {
            cmd_predict(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen(args) => {
            cmd_gen(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bound(args) => {
            cmd_bound(args)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn default_config() -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemSpec::Generator {
            n_dim: 8,
            target_rho: 0.5,
            seed: 1,
            cast: CastKind::Raw,
        },
        strategies: Vec::new(),
        cluster: ClusterSpec {
            workers: 10,
            beta1: 1.0,
            beta2: 0.01,
            compute_rate: 0.0,
            straggler: StragglerModel::None,
            seed: 0,
        },
        backend: Backend::Float,
        pad: true,
        out: None,
        format: ReportFormat::Csv,
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => default_config(),
    };

    if let ProblemSpec::Generator {
        n_dim,
        target_rho,
        seed,
        ..
    } = &mut cfg.problem
    {
        if let Some(v) = args.n_dim {
            *n_dim = v;
        }
        if let Some(v) = args.target_rho {
            *target_rho = v;
        }
        if let Some(v) = args.seed {
            *seed = v;
        }
    } else if args.n_dim.is_some() || args.target_rho.is_some() {
        bail!("--N/--target-rho only apply to generator problems");
    }
    if let Some(v) = args.p {
        cfg.cluster.workers = v;
    }
    if let Some(v) = args.beta1 {
        cfg.cluster.beta1 = v;
    }
    if let Some(v) = args.beta2 {
        cfg.cluster.beta2 = v;
    }
    if let Some(v) = args.seed {
        cfg.cluster.seed = v;
    }
    if let Some(v) = args.compute_rate {
        cfg.cluster.compute_rate = v;
    }
    if let Some(v) = args.backend {
        cfg.backend = v.into();
    }
    if let Some(v) = args.format {
        cfg.format = v.into();
    }
    if let Some(v) = &args.out {
        cfg.out = Some(v.display().to_string());
    }
    if let Some(strategy) = args.strategy {
        let strategy: Strategy = strategy.into();
        cfg.strategies = vec![StrategySpec {
            strategy,
            m: Axis(args.m.into_iter().collect()),
            n: Axis(args.n.into_iter().collect()),
            ell: Axis(args.ell.into_iter().collect()),
            k: args.k,
        }];
    } else if args.m.is_some() || args.n.is_some() || args.ell.is_some() || args.k.is_some() {
        bail!("--m/--n/--ell/--K need --strategy");
    }
    if cfg.strategies.is_empty() {
        bail!("no strategies: pass --strategy or a config with a strategy list");
    }

    if cfg.backend == Backend::Float {
        // warning-level check: convergence needs a contractive iteration matrix
        let problem = load_float_problem(&cfg.problem)?;
        if let Ok(sys) = problem.system(2) {
            if let Some(rho) = contraction_warning(&sys) {
                eprintln!(
                    "warning: estimated spectral radius {rho:.4} >= 1; the iteration may diverge"
                );
            }
        }
    }

    let rows = run_experiment(&cfg)?;
    match &cfg.out {
        Some(path) => {
            write_report_file(&rows, cfg.format, Path::new(path))?;
            eprintln!("wrote {} rows to {path}", rows.len());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            emit_report(&rows, cfg.format, &mut stdout)?;
            stdout.flush()?;
        }
    }
    let all_pass = !rows.is_empty() && rows.iter().all(|r| r.oracle_pass && r.status == "ok");
    for row in rows.iter().filter(|r| r.status != "ok") {
        eprintln!("row {}: {}", row.idx, row.status);
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let strategy: Strategy = args.strategy.into();
    let k = match (args.k, strategy) {
        (Some(k), _) => k,
        (None, Strategy::Baseline) => args.p,
        (None, _) => bail!("--K is required for coded strategies"),
    };
    let ledger = predicted_costs(
        strategy, args.n_dim, args.p, k, args.n, args.ell, args.beta1, args.beta2,
    )?;
    println!("{}", serde_json::to_string_pretty(&ledger)?);
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    match args.backend {
        BackendArg::Float => {
            let p = generate_problem(args.n_dim, args.target_rho, args.seed)?;
            write_problem(&args.out_dir, &p.a, &p.q, &p.y, &p.x0)?;
            let rho = spectral_radius_estimate(&p.a, 400, args.seed);
            eprintln!(
                "wrote {}x{} problem to {} (estimated spectral radius {rho:.4})",
                args.n_dim,
                args.n_dim,
                args.out_dir.display()
            );
        }
        BackendArg::Exact => {
            let rho = Rational::from_f64_exact(args.target_rho)
                .map_err(|_| anyhow::anyhow!("target rho must be finite"))?;
            let p = generate_problem_exact(args.n_dim, rho, args.seed)?;
            write_problem(&args.out_dir, &p.a, &p.q, &p.y, &p.x0)?;
            eprintln!(
                "wrote {}x{} exact problem to {} (spectral radius exactly {})",
                args.n_dim,
                args.n_dim,
                args.out_dir.display(),
                args.target_rho
            );
        }
    }
    Ok(())
}

fn write_problem<S: Scalar>(
    dir: &Path,
    a: &polylin::linalg::Matrix<S>,
    q: &polylin::linalg::Matrix<S>,
    y: &Vector<S>,
    x0: &Vector<S>,
) -> Result<()> {
    write_matrix_file(&dir.join("a.txt"), a)?;
    write_matrix_file(&dir.join("q.txt"), q)?;
    write_matrix_file(&dir.join("y.txt"), &vector_as_matrix(y))?;
    write_matrix_file(&dir.join("x0.txt"), &vector_as_matrix(x0))?;
    Ok(())
}

fn cmd_bound(args: BoundArgs) -> Result<()> {
    let (a, q, y, x0) = match (&args.a, &args.q, &args.y) {
        (Some(a), Some(q), Some(y)) => {
            let a = read_matrix_file::<f64>(a)?;
            let q = read_matrix_file::<f64>(q)?;
            let y = matrix_as_vector(&read_matrix_file::<f64>(y)?)?;
            let x0 = match &args.x0 {
                Some(p) => matrix_as_vector(&read_matrix_file::<f64>(p)?)?,
                None => Vector::zeros(a.rows()),
            };
            (a, q, y, x0)
        }
        (None, None, None) => {
            let p = generate_problem(args.n_dim, args.target_rho, args.seed)?;
            (p.a, p.q, p.y, p.x0)
        }
        _ => bail!("--a, --q and --y must be given together"),
    };
    let dim = a.rows();
    let sys = IterationSystem::new(a, q, y, x0, 2)?;

    // sigma1 from power iteration; this is an estimate, not a guarantee
    let sigma1 = spectral_radius_estimate(&sys.a, 500, args.seed);
    if sigma1 >= 1.0 {
        eprintln!(
            "warning: estimated spectral radius {sigma1:.4} >= 1; the iteration may not converge"
        );
    }
    // max |alpha_i| over-approximated by the full initial error norm
    let star = fixed_point(&sys)?;
    let max_alpha = sys.x0.sub(&star).norm_l2();
    let (bound, n_even) = required_iterations(&ErrorBoundInputs {
        sigma1,
        dim,
        max_alpha,
        epsilon: args.epsilon,
    })?;
    println!(
        "{}",
        serde_json::json!({
            "sigma1_estimate": sigma1,
            "max_alpha": max_alpha,
            "epsilon": args.epsilon,
            "bound": bound,
            "iterations": n_even,
        })
    );
    Ok(())
}
