//! Experiment front end: problem sources, strategy grids, per-run report
//! rows, and CSV/JSON emission.
//!
//! A JSON config names a problem (matrix files or a seeded generator), a
//! list of strategy entries whose `m`/`n`/`ell` fields may be single values
//! or arrays (expanded as a cartesian product per entry), and the cluster
//! shape. Every grid point is validated up front, runs against the
//! simulator, and yields one [`ReportRow`] carrying the config coordinates,
//! the measured ledger, the error against the fixed point, and an
//! oracle-equality verdict against the centralized solver.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::{recovery_threshold, CodingError, CodingParams};
use crate::linalg::{
    matrix_as_vector, read_matrix_file, spectral_radius_estimate, LinalgError, Matrix, Vector,
};
use crate::scalar::{Backend, Rational, Scalar};
use crate::sim::{
    run_baseline, run_mrpolylin, run_polylin, ClusterConfig, RunResult, SimError, StragglerModel,
    Strategy,
};
use crate::solver::{error_norm, gd_cast, iterate, jacobi_cast, IterationSystem, SolverError};

/// Relative tolerance for the float-backend oracle verdict.
pub const FLOAT_ORACLE_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("iteration count must be even and at least 2, got {0}")]
    OddIterationCount(usize),
    #[error("phase count {ell} does not split {n} iterations into even phases")]
    BadPhaseSplit { ell: usize, n: usize },
    #[error("recovery threshold {k} exceeds the worker count {p}")]
    ThresholdExceedsWorkers { k: usize, p: usize },
    #[error("explicit threshold {k} does not match the derived threshold {derived}")]
    ThresholdMismatch { k: usize, derived: usize },
    #[error("padding disabled and {factor} does not divide the problem size {dim}")]
    IndivisibleUnpadded { factor: usize, dim: usize },
    #[error("strategy entry for {strategy} is missing required field {field}")]
    MissingField {
        strategy: Strategy,
        field: &'static str,
    },
    #[error("target spectral radius must lie in (0, 1), got {0}")]
    BadTargetRho(f64),
    #[error("generated spectral radius {got:.4} misses target {target:.4} by more than 5%")]
    GeneratorOffTarget { got: f64, target: f64 },
    #[error("problem matrices disagree: {0}")]
    BadProblem(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

/// A grid axis: a single value or an array in JSON.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Axis(pub Vec<usize>);

impl<'de> Deserialize<'de> for Axis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum OneOrMany {
            One(usize),
            Many(Vec<usize>),
        }
        Ok(match OneOrMany::deserialize(d)? {
            OneOrMany::One(v) => Axis(vec![v]),
            OneOrMany::Many(v) => Axis(v),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// Read matrices from text files (`rows cols` header then row-major
    /// values). `y` and optional `x0` are single-column matrices.
    Files {
        a: String,
        q: String,
        y: String,
        #[serde(default)]
        x0: Option<String>,
    },
    /// Seeded random problem with `q = I`, random `y`, `x0 = 0`.
    Generator {
        n_dim: usize,
        target_rho: f64,
        seed: u64,
        #[serde(default)]
        cast: CastKind,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CastKind {
    /// Generate the recursion matrix directly, scaled to the target
    /// spectral radius.
    #[default]
    Raw,
    /// Generate a diagonally dominant square system and apply the Jacobi
    /// cast, rescaling the off-diagonal part toward the target radius.
    Jacobi,
    /// Generate a square least-squares system and apply the gradient-descent
    /// cast with an automatic step size (the target radius is not enforced).
    Gd,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrategySpec {
    pub strategy: Strategy,
    #[serde(default)]
    pub m: Axis,
    #[serde(default)]
    pub n: Axis,
    #[serde(default)]
    pub ell: Axis,
    /// Optional explicit recovery threshold; must match the derived value.
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub workers: usize,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default)]
    pub compute_rate: f64,
    #[serde(default = "default_straggler")]
    pub straggler: StragglerModel,
    #[serde(default)]
    pub seed: u64,
}

fn default_straggler() -> StragglerModel {
    StragglerModel::None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub strategies: Vec<StrategySpec>,
    pub cluster: ClusterSpec,
    pub backend: Backend,
    /// When false, sizes the split factor does not divide are rejected
    /// instead of zero-padded.
    #[serde(default = "default_true")]
    pub pad: bool,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default = "default_format")]
    pub format: ReportFormat,
}

fn default_true() -> bool {
    true
}

fn default_format() -> ReportFormat {
    ReportFormat::Csv
}

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct Problem<S> {
    pub a: Matrix<S>,
    pub q: Matrix<S>,
    pub y: Vector<S>,
    pub x0: Vector<S>,
}

impl<S: Scalar> Problem<S> {
    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn system(&self, iterations: usize) -> Result<IterationSystem<S>, SolverError> {
        IterationSystem::new(
            self.a.clone(),
            self.q.clone(),
            self.y.clone(),
            self.x0.clone(),
            iterations,
        )
    }
}

/// Random float problem scaled to the requested spectral radius: a symmetric
/// uniform matrix rescaled by a power-iteration estimate, `Q = I`, uniform
/// `y`, `x0 = 0`. The achieved radius is re-verified to within 5%.
pub fn generate_problem(
    dim: usize,
    target_rho: f64,
    seed: u64,
) -> Result<Problem<f64>, BenchError> {
    if !(target_rho > 0.0 && target_rho < 1.0) {
        return Err(BenchError::BadTargetRho(target_rho));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let sym = raw.add(&raw.transpose()).scale(&0.5);
    let rho = spectral_radius_estimate(&sym, 400, seed ^ 0xa5a5);
    if rho == 0.0 {
        return Err(BenchError::BadProblem("degenerate random draw".into()));
    }
    let a = sym.scale(&(target_rho / rho));
    let achieved = spectral_radius_estimate(&a, 400, seed ^ 0x5a5a);
    if (achieved - target_rho).abs() > 0.05 * target_rho {
        return Err(BenchError::GeneratorOffTarget {
            got: achieved,
            target: target_rho,
        });
    }
    let y = Vector::from_vec((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    Ok(Problem {
        a,
        q: Matrix::identity(dim),
        y,
        x0: Vector::zeros(dim),
    })
}

/// Random exact problem with exactly known spectral radius: a diagonal
/// matrix whose largest-magnitude entry is exactly `target_rho`, conjugated
/// by unimodular shear matrices (similarity preserves the spectrum), so the
/// radius is known without estimation. `Q = I`, random rational `y`,
/// `x0 = 0`.
pub fn generate_problem_exact(
    dim: usize,
    target_rho: Rational,
    seed: u64,
) -> Result<Problem<Rational>, BenchError> {
    let rho_f = target_rho.to_f64();
    if !(rho_f > 0.0 && rho_f < 1.0) {
        return Err(BenchError::BadTargetRho(rho_f));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Matrix::<Rational>::zeros(dim, dim);
    for i in 0..dim {
        let v = if i == 0 {
            target_rho.clone()
        } else {
            // strictly smaller magnitude: scale the target by num/den < 1
            let num = rng.random_range(0..=3i64);
            target_rho.clone() * Rational::new(num, 4)
        };
        let v = if rng.random_bool(0.5) { -v } else { v };
        a.set(i, i, v);
    }
    // conjugate by elementary shears E = I + c * e_i e_j^T (det 1):
    // A <- E A E^{-1} with E^{-1} = I - c * e_i e_j^T
    for _ in 0..2 * dim {
        let i = rng.random_range(0..dim);
        let mut j = rng.random_range(0..dim);
        if i == j {
            j = (j + 1) % dim;
        }
        if dim == 1 {
            break;
        }
        let c = Rational::new(rng.random_range(-2..=2i64), rng.random_range(1..=2i64));
        if c.is_zero() {
            continue;
        }
        // row operation: row_i += c * row_j
        for col in 0..dim {
            let v = a.get(i, col).clone() + c.clone() * a.get(j, col).clone();
            a.set(i, col, v);
        }
        // column operation: col_j -= c * col_i
        for row in 0..dim {
            let v = a.get(row, j).clone() - c.clone() * a.get(row, i).clone();
            a.set(row, j, v);
        }
    }
    let y = Vector::from_vec(
        (0..dim)
            .map(|_| Rational::new(rng.random_range(-4..=4), rng.random_range(1..=3)))
            .collect(),
    );
    Ok(Problem {
        a,
        q: Matrix::identity(dim),
        y,
        x0: Vector::zeros(dim),
    })
}

fn load_problem_files<S: Scalar>(
    a: &str,
    q: &str,
    y: &str,
    x0: &Option<String>,
) -> Result<Problem<S>, BenchError> {
    let a = read_matrix_file::<S>(Path::new(a))?;
    let q = read_matrix_file::<S>(Path::new(q))?;
    let y = matrix_as_vector(&read_matrix_file::<S>(Path::new(y))?)?;
    let x0 = match x0 {
        Some(path) => matrix_as_vector(&read_matrix_file::<S>(Path::new(path))?)?,
        None => Vector::zeros(a.rows()),
    };
    if !a.is_square() || !q.is_square() || a.rows() != q.rows() {
        return Err(BenchError::BadProblem(format!(
            "A is {}x{}, Q is {}x{}",
            a.rows(),
            a.cols(),
            q.rows(),
            q.cols()
        )));
    }
    if y.len() != a.rows() || x0.len() != a.rows() {
        return Err(BenchError::BadProblem(format!(
            "y has length {}, x0 has length {}, system size is {}",
            y.len(),
            x0.len(),
            a.rows()
        )));
    }
    Ok(Problem { a, q, y, x0 })
}

/// Materialize a float problem from its config description (loading files
/// or running the seeded generator). Exposed so front ends can inspect the
/// problem — for example to warn when the iteration matrix is not a
/// contraction — without duplicating the construction logic.
pub fn load_float_problem(spec: &ProblemSpec) -> Result<Problem<f64>, BenchError> {
    match spec {
        ProblemSpec::Files { a, q, y, x0 } => load_problem_files(a, q, y, x0),
        ProblemSpec::Generator {
            n_dim,
            target_rho,
            seed,
            cast,
        } => match cast {
            CastKind::Raw => generate_problem(*n_dim, *target_rho, *seed),
            CastKind::Jacobi => {
                let dim = *n_dim;
                if !(*target_rho > 0.0 && *target_rho < 1.0) {
                    return Err(BenchError::BadTargetRho(*target_rho));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut m = Matrix::from_fn(dim, dim, |i, j| {
                    if i == j {
                        dim as f64
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                });
                // one rescaling pass of the off-diagonal part pins the
                // iteration matrix radius to the target (A is linear in L)
                let (a0, _) = jacobi_cast(&m)?;
                let rho = spectral_radius_estimate(&a0, 400, seed ^ 0x11);
                if rho > 0.0 {
                    let s = target_rho / rho;
                    for i in 0..dim {
                        for j in 0..dim {
                            if i != j {
                                m.set(i, j, m.get(i, j) * s);
                            }
                        }
                    }
                }
                let (a, q) = jacobi_cast(&m)?;
                let y = Vector::from_vec((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
                Ok(Problem {
                    a,
                    q,
                    y,
                    x0: Vector::zeros(dim),
                })
            }
            CastKind::Gd => {
                let dim = *n_dim;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let m = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
                let mtm = m.transpose().mat_mul(&m)?;
                let top = spectral_radius_estimate(&mtm, 400, seed ^ 0x22).max(f64::MIN_POSITIVE);
                let delta = 0.9 / top;
                let (a, q) = gd_cast(&m, &delta, &0.0)?;
                let y = Vector::from_vec((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
                Ok(Problem {
                    a,
                    q,
                    y,
                    x0: Vector::zeros(dim),
                })
            }
        },
    }
}

fn generated_exact(spec: &ProblemSpec) -> Result<Problem<Rational>, BenchError> {
    match spec {
        ProblemSpec::Files { a, q, y, x0 } => load_problem_files(a, q, y, x0),
        ProblemSpec::Generator {
            n_dim,
            target_rho,
            seed,
            cast,
        } => match cast {
            CastKind::Raw => {
                let rho = Rational::from_f64_exact(*target_rho)
                    .map_err(|_| BenchError::BadTargetRho(*target_rho))?;
                generate_problem_exact(*n_dim, rho, *seed)
            }
            CastKind::Jacobi => {
                let dim = *n_dim;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let m = Matrix::from_fn(dim, dim, |i, j| {
                    if i == j {
                        Rational::from_integer(dim as i64 * 4)
                    } else {
                        Rational::new(rng.random_range(-2..=2), rng.random_range(1..=2))
                    }
                });
                let (a, q) = jacobi_cast(&m)?;
                let y = Vector::from_vec(
                    (0..dim)
                        .map(|_| Rational::new(rng.random_range(-4..=4), 1))
                        .collect(),
                );
                Ok(Problem {
                    a,
                    q,
                    y,
                    x0: Vector::zeros(dim),
                })
            }
            CastKind::Gd => {
                let dim = *n_dim;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let m = Matrix::from_fn(dim, dim, |_, _| {
                    Rational::new(rng.random_range(-2..=2), rng.random_range(1..=2))
                });
                // conservative exact step size via the row-sum bound on M^T M
                let mtm = m.transpose().mat_mul(&m)?;
                let mut bound = Rational::zero();
                for i in 0..dim {
                    let mut row = Rational::zero();
                    for j in 0..dim {
                        row = row + mtm.get(i, j).abs();
                    }
                    if bound.abs_cmp(&row) == std::cmp::Ordering::Less {
                        bound = row;
                    }
                }
                let delta = if bound.is_zero() {
                    Rational::one()
                } else {
                    Rational::new(9, 10) * (Rational::one() / bound)
                };
                let (a, q) = gd_cast(&m, &delta, &Rational::zero())?;
                let y = Vector::from_vec(
                    (0..dim)
                        .map(|_| Rational::new(rng.random_range(-4..=4), 1))
                        .collect(),
                );
                Ok(Problem {
                    a,
                    q,
                    y,
                    x0: Vector::zeros(dim),
                })
            }
        },
    }
}

// ---------------------------------------------------------------------------
// Grid expansion and validation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub strategy: Strategy,
    pub m: Option<usize>,
    pub n: usize,
    pub ell: Option<usize>,
    pub k: usize,
}

/// Expand strategy entries into concrete grid points, validating every point
/// against the protocol preconditions. Each violation gets its own error so
/// config mistakes are directly actionable.
pub fn expand_grid(cfg: &ExperimentConfig, dim: usize) -> Result<Vec<GridPoint>, BenchError> {
    let p = cfg.cluster.workers;
    let mut points = Vec::new();
    for spec in &cfg.strategies {
        if spec.n.0.is_empty() {
            return Err(BenchError::MissingField {
                strategy: spec.strategy,
                field: "n",
            });
        }
        match spec.strategy {
            Strategy::Baseline => {
                for &n in &spec.n.0 {
                    points.push(validate_point(
                        cfg,
                        dim,
                        Strategy::Baseline,
                        None,
                        n,
                        None,
                        spec.k,
                        p,
                    )?);
                }
            }
            Strategy::Polylin => {
                if spec.m.0.is_empty() {
                    return Err(BenchError::MissingField {
                        strategy: spec.strategy,
                        field: "m",
                    });
                }
                for &m in &spec.m.0 {
                    for &n in &spec.n.0 {
                        points.push(validate_point(
                            cfg,
                            dim,
                            Strategy::Polylin,
                            Some(m),
                            n,
                            None,
                            spec.k,
                            p,
                        )?);
                    }
                }
            }
            Strategy::Mrpolylin => {
                if spec.m.0.is_empty() {
                    return Err(BenchError::MissingField {
                        strategy: spec.strategy,
                        field: "m",
                    });
                }
                if spec.ell.0.is_empty() {
                    return Err(BenchError::MissingField {
                        strategy: spec.strategy,
                        field: "ell",
                    });
                }
                for &m in &spec.m.0 {
                    for &n in &spec.n.0 {
                        for &ell in &spec.ell.0 {
                            points.push(validate_point(
                                cfg,
                                dim,
                                Strategy::Mrpolylin,
                                Some(m),
                                n,
                                Some(ell),
                                spec.k,
                                p,
                            )?);
                        }
                    }
                }
            }
        }
    }
    Ok(points)
}

#[allow(clippy::too_many_arguments)]
fn validate_point(
    cfg: &ExperimentConfig,
    dim: usize,
    strategy: Strategy,
    m: Option<usize>,
    n: usize,
    ell: Option<usize>,
    explicit_k: Option<usize>,
    p: usize,
) -> Result<GridPoint, BenchError> {
    if n < 2 || n % 2 != 0 {
        return Err(BenchError::OddIterationCount(n));
    }
    let k = match strategy {
        Strategy::Baseline => {
            if let Some(k) = explicit_k {
                if k != p {
                    return Err(BenchError::ThresholdMismatch { k, derived: p });
                }
            }
            if !cfg.pad && dim % p != 0 {
                return Err(BenchError::IndivisibleUnpadded { factor: p, dim });
            }
            p
        }
        Strategy::Polylin | Strategy::Mrpolylin => {
            let m = m.expect("coded strategies carry m");
            let phase_n = match strategy {
                Strategy::Mrpolylin => {
                    let ell = ell.expect("mrpolylin carries ell");
                    if ell == 0 || n % ell != 0 || (n / ell) % 2 != 0 || n / ell < 2 {
                        return Err(BenchError::BadPhaseSplit { ell, n });
                    }
                    n / ell
                }
                _ => n,
            };
            let derived = recovery_threshold(m, phase_n)?;
            if let Some(k) = explicit_k {
                if k != derived {
                    return Err(BenchError::ThresholdMismatch { k, derived });
                }
            }
            if derived > p {
                return Err(BenchError::ThresholdExceedsWorkers { k: derived, p });
            }
            if !cfg.pad && dim % m != 0 {
                return Err(BenchError::IndivisibleUnpadded { factor: m, dim });
            }
            derived
        }
    };
    Ok(GridPoint {
        strategy,
        m,
        n,
        ell,
        k,
    })
}

// ---------------------------------------------------------------------------
// Report rows
// ---------------------------------------------------------------------------

/// One row per grid point: config coordinates, measured ledger, error against
/// the fixed point, and the oracle verdict (exact equality over the exact
/// backend, relative error at most [`FLOAT_ORACLE_TOL`] over floats).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReportRow {
    pub idx: usize,
    pub strategy: String,
    pub backend: String,
    pub n_dim: usize,
    pub m: Option<usize>,
    pub n: usize,
    pub ell: Option<usize>,
    pub p: usize,
    pub k: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub rounds: u64,
    pub words_down: u64,
    pub words_up: u64,
    pub worker_mults: u64,
    pub master_mults: u64,
    pub worker_storage: u64,
    pub offline_words: u64,
    pub stragglers_tolerated: u64,
    pub sim_time: f64,
    pub comm_cost: f64,
    pub error_norm: f64,
    pub oracle_pass: bool,
    pub status: String,
}

/// Run every grid point against the simulator. Per-point failures are
/// recorded in the row's `status` and the run continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>, BenchError> {
    match cfg.backend {
        Backend::Float => {
            let problem = load_float_problem(&cfg.problem)?;
            run_grid(cfg, &problem)
        }
        Backend::Exact => {
            let problem = generated_exact(&cfg.problem)?;
            run_grid(cfg, &problem)
        }
    }
}

fn run_grid<S: Scalar>(
    cfg: &ExperimentConfig,
    problem: &Problem<S>,
) -> Result<Vec<ReportRow>, BenchError> {
    let points = expand_grid(cfg, problem.dim())?;
    let mut rows = Vec::with_capacity(points.len());
    for (idx, point) in points.iter().enumerate() {
        rows.push(run_point(cfg, problem, *point, idx));
    }
    Ok(rows)
}

fn run_point<S: Scalar>(
    cfg: &ExperimentConfig,
    problem: &Problem<S>,
    point: GridPoint,
    idx: usize,
) -> ReportRow {
    let mut row = ReportRow {
        idx,
        strategy: point.strategy.to_string(),
        backend: S::BACKEND.to_string(),
        n_dim: problem.dim(),
        m: point.m,
        n: point.n,
        ell: point.ell,
        p: cfg.cluster.workers,
        k: point.k,
        seed: cfg.cluster.seed,
        beta1: cfg.cluster.beta1,
        beta2: cfg.cluster.beta2,
        rounds: 0,
        words_down: 0,
        words_up: 0,
        worker_mults: 0,
        master_mults: 0,
        worker_storage: 0,
        offline_words: 0,
        stragglers_tolerated: 0,
        sim_time: f64::NAN,
        comm_cost: f64::NAN,
        error_norm: f64::NAN,
        oracle_pass: false,
        status: "ok".into(),
    };
    match execute_point(cfg, problem, point) {
        Ok((run, sys)) => {
            row.rounds = run.ledger.rounds;
            row.words_down = run.ledger.words_down;
            row.words_up = run.ledger.words_up;
            row.worker_mults = run.ledger.worker_mults;
            row.master_mults = run.ledger.master_mults;
            row.worker_storage = run.ledger.worker_storage;
            row.offline_words = run.ledger.offline_words;
            row.stragglers_tolerated = run.ledger.stragglers_tolerated;
            row.sim_time = run.ledger.sim_time;
            row.comm_cost = run.ledger.comm_cost(cfg.cluster.beta1, cfg.cluster.beta2);
            match run.x {
                Some(x) => {
                    let reference = iterate(&sys);
                    row.oracle_pass = oracle_matches(&x, &reference);
                    row.error_norm = error_norm(&sys, &x).unwrap_or(f64::NAN);
                }
                None => {
                    row.status = "stalled: worker failure".into();
                }
            }
        }
        Err(e) => {
            row.status = e.to_string();
        }
    }
    row
}

type PointOutcome<S> = (RunResult<S>, IterationSystem<S>);

fn execute_point<S: Scalar>(
    cfg: &ExperimentConfig,
    problem: &Problem<S>,
    point: GridPoint,
) -> Result<PointOutcome<S>, BenchError> {
    let sys = problem.system(point.n)?;
    let cluster = ClusterConfig {
        workers: cfg.cluster.workers,
        required: point.k,
        beta1: cfg.cluster.beta1,
        beta2: cfg.cluster.beta2,
        compute_rate: cfg.cluster.compute_rate,
        straggler: cfg.cluster.straggler.clone(),
        seed: cfg.cluster.seed,
    };
    let run = match point.strategy {
        Strategy::Baseline => run_baseline(&sys, &cluster)?,
        Strategy::Polylin => {
            let params = CodingParams::<S>::with_default_points(
                point.m.expect("validated"),
                point.n,
                cluster.workers,
            )?;
            run_polylin(&sys, &params, &cluster)?
        }
        Strategy::Mrpolylin => {
            let ell = point.ell.expect("validated");
            let params = CodingParams::<S>::with_default_points(
                point.m.expect("validated"),
                point.n / ell,
                cluster.workers,
            )?;
            run_mrpolylin(&sys, &params, ell, &cluster)?
        }
    };
    Ok((run, sys))
}

fn oracle_matches<S: Scalar>(x: &Vector<S>, reference: &Vector<S>) -> bool {
    match S::BACKEND {
        Backend::Exact => x == reference,
        Backend::Float => {
            let denom = reference.norm_l2();
            let num = x.sub(reference).norm_l2();
            if denom == 0.0 {
                num <= FLOAT_ORACLE_TOL
            } else {
                num / denom <= FLOAT_ORACLE_TOL
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

/// Write rows in the requested format. Column order is the `ReportRow` field
/// order; output is deterministic byte-for-byte for identical inputs.
pub fn emit_report(
    rows: &[ReportRow],
    format: ReportFormat,
    out: &mut dyn Write,
) -> Result<(), BenchError> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, rows)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_report_file(
    rows: &[ReportRow],
    format: ReportFormat,
    path: &Path,
) -> Result<(), BenchError> {
    let mut buf = Vec::new();
    emit_report(rows, format, &mut buf)?;
    Ok(std::fs::write(path, buf)?)
}
