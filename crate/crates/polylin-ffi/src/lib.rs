//! C ABI for the coded-solver library.
//!
//! Binary64 backend only. Handles are opaque pointers owned by this library:
//! every `*_new`/`*_generate`/`*_load` has a matching `*_free`, all functions
//! return [`PolylinStatus`], and `polylin_last_error_message` describes the
//! most recent failure on the calling thread. The generated header lives at
//! `include/polylin.h`.

#![allow(clippy::manual_is_multiple_of)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use polylin::bench::{generate_problem, Problem};
use polylin::coding::CodingParams;
use polylin::linalg::{matrix_as_vector, read_matrix_file, Vector};
use polylin::sim::{
    predicted_costs, run_baseline, run_mrpolylin, run_polylin, ClusterConfig, CostLedger,
    RunResult, StragglerModel, Strategy,
};
use polylin::solver::{required_iterations, ErrorBoundInputs, IterationSystem};

/// Result code of every API call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PolylinStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments violate a precondition; see `polylin_last_error_message`.
    InvalidArgument = 2,
    /// The run could not complete (for example a baseline stall or too few
    /// surviving workers to decode).
    RuntimeError = 3,
    /// An output buffer is smaller than the data it must receive.
    BufferTooSmall = 4,
}

/// Straggler model selector for [`PolylinCluster`].
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PolylinStraggler {
    /// No injected delays.
    None = 0,
    /// `delay = shift + Exp(rate)` per worker per round.
    ShiftedExp = 1,
    /// Independent failure with probability `fail_prob` per worker per round.
    Fail = 2,
}

/// Cluster shape and cost coefficients.
///
/// `required` is the number of responders the master waits for; pass 0 to
/// derive it (the recovery threshold for coded runs, the worker count for
/// baseline runs).
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PolylinCluster {
    pub workers: u64,
    pub required: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub compute_rate: f64,
    pub seed: u64,
    pub straggler: PolylinStraggler,
    pub straggler_shift: f64,
    pub straggler_rate: f64,
    pub straggler_fail_prob: f64,
}

/// Per-run cost ledger (see the library documentation for field semantics).
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct PolylinLedger {
    pub rounds: u64,
    pub words_down: u64,
    pub words_up: u64,
    pub worker_mults: u64,
    pub master_mults: u64,
    pub worker_storage: u64,
    pub offline_words: u64,
    pub stragglers_tolerated: u64,
    pub sim_time: f64,
}

impl From<CostLedger> for PolylinLedger {
    fn from(l: CostLedger) -> Self {
        PolylinLedger {
            rounds: l.rounds,
            words_down: l.words_down,
            words_up: l.words_up,
            worker_mults: l.worker_mults,
            master_mults: l.master_mults,
            worker_storage: l.worker_storage,
            offline_words: l.offline_words,
            stragglers_tolerated: l.stragglers_tolerated,
            sim_time: l.sim_time,
        }
    }
}

/// Strategy selector for `polylin_predicted_costs`.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PolylinStrategy {
    Baseline = 0,
    Polylin = 1,
    Mrpolylin = 2,
}

/// Opaque handle to a loaded or generated problem.
pub struct PolylinProblem {
    inner: Problem<f64>,
}

/// Opaque handle to a completed run.
pub struct PolylinRun {
    inner: RunResult<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: PolylinStatus, msg: &str) -> PolylinStatus {
    set_error(msg);
    status
}

/// Guard against panics crossing the ABI; they become `RuntimeError`.
fn guarded(f: impl FnOnce() -> PolylinStatus) -> PolylinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".to_string());
            fail(PolylinStatus::RuntimeError, &msg)
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn polylin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn polylin_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Generate a random problem: symmetric matrix scaled to `target_rho`,
/// identity input operator, random right-hand side, zero start vector.
///
/// # Safety
/// `out` must be a valid pointer; the result must be released with
/// `polylin_problem_free`.
#[no_mangle]
pub unsafe extern "C" fn polylin_problem_generate(
    dim: u64,
    target_rho: f64,
    seed: u64,
    out: *mut *mut PolylinProblem,
) -> PolylinStatus {
    if out.is_null() {
        return fail(PolylinStatus::NullArgument, "out is null");
    }
    guarded(|| match generate_problem(dim as usize, target_rho, seed) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(PolylinProblem { inner })) };
            PolylinStatus::Ok
        }
        Err(e) => fail(PolylinStatus::InvalidArgument, &e.to_string()),
    })
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, PolylinStatus> {
    if ptr.is_null() {
        set_error("path is null");
        return Err(PolylinStatus::NullArgument);
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(PolylinStatus::InvalidArgument)
        }
    }
}

/// Load a problem from matrix text files (`rows cols` header then row-major
/// values; vectors are single-column matrices). `x0_path` may be null for a
/// zero start vector.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn polylin_problem_load(
    a_path: *const c_char,
    q_path: *const c_char,
    y_path: *const c_char,
    x0_path: *const c_char,
    out: *mut *mut PolylinProblem,
) -> PolylinStatus {
    if out.is_null() {
        return fail(PolylinStatus::NullArgument, "out is null");
    }
    let a_path = match unsafe { path_arg(a_path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    let q_path = match unsafe { path_arg(q_path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    let y_path = match unsafe { path_arg(y_path) } {
        Ok(p) => p,
        Err(s) => return s,
    };
    let x0_path = if x0_path.is_null() {
        None
    } else {
        match unsafe { path_arg(x0_path) } {
            Ok(p) => Some(p),
            Err(s) => return s,
        }
    };
    guarded(|| {
        let load = || -> Result<Problem<f64>, String> {
            let a = read_matrix_file::<f64>(a_path).map_err(|e| e.to_string())?;
            let q = read_matrix_file::<f64>(q_path).map_err(|e| e.to_string())?;
            let y = matrix_as_vector(&read_matrix_file::<f64>(y_path).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let x0 = match x0_path {
                Some(p) => {
                    matrix_as_vector(&read_matrix_file::<f64>(p).map_err(|e| e.to_string())?)
                        .map_err(|e| e.to_string())?
                }
                None => Vector::zeros(a.rows()),
            };
            if !a.is_square() || a.rows() != q.rows() || y.len() != a.rows() || x0.len() != a.rows()
            {
                return Err("matrix and vector sizes disagree".into());
            }
            Ok(Problem { a, q, y, x0 })
        };
        match load() {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(PolylinProblem { inner })) };
                PolylinStatus::Ok
            }
            Err(e) => fail(PolylinStatus::InvalidArgument, &e),
        }
    })
}

/// Problem dimension, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn polylin_problem_dim(problem: *const PolylinProblem) -> u64 {
    if problem.is_null() {
        return 0;
    }
    unsafe { &*problem }.inner.dim() as u64
}

/// Release a problem handle. Null is ignored.
///
/// # Safety
/// `problem` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn polylin_problem_free(problem: *mut PolylinProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

fn cluster_config(c: &PolylinCluster, derived_required: u64) -> ClusterConfig {
    let straggler = match c.straggler {
        PolylinStraggler::None => StragglerModel::None,
        PolylinStraggler::ShiftedExp => StragglerModel::ShiftedExp {
            shift: c.straggler_shift,
            rate: c.straggler_rate,
        },
        PolylinStraggler::Fail => StragglerModel::Fail {
            prob: c.straggler_fail_prob,
        },
    };
    let required = if c.required == 0 {
        derived_required
    } else {
        c.required
    };
    ClusterConfig {
        workers: c.workers as usize,
        required: required as usize,
        beta1: c.beta1,
        beta2: c.beta2,
        compute_rate: c.compute_rate,
        straggler,
        seed: c.seed,
    }
}

fn finish_run(
    run: Result<RunResult<f64>, polylin::sim::SimError>,
    out: *mut *mut PolylinRun,
) -> PolylinStatus {
    match run {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(PolylinRun { inner })) };
            PolylinStatus::Ok
        }
        Err(e) => fail(PolylinStatus::RuntimeError, &e.to_string()),
    }
}

/// Run the row-banded baseline protocol for `iterations` steps.
///
/// # Safety
/// `problem`, `cluster` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn polylin_run_baseline(
    problem: *const PolylinProblem,
    iterations: u64,
    cluster: *const PolylinCluster,
    out: *mut *mut PolylinRun,
) -> PolylinStatus {
    if problem.is_null() || cluster.is_null() || out.is_null() {
        return fail(PolylinStatus::NullArgument, "null argument");
    }
    let problem = unsafe { &*problem };
    let cluster = unsafe { &*cluster };
    guarded(|| {
        let sys = match problem.inner.system(iterations as usize) {
            Ok(sys) => sys,
            Err(e) => return fail(PolylinStatus::InvalidArgument, &e.to_string()),
        };
        let cfg = cluster_config(cluster, cluster.workers);
        finish_run(run_baseline(&sys, &cfg), out)
    })
}

/// Run the coded protocol: `phases == 1` is the single-round scheme, larger
/// values split the iterations into that many sequential coded phases.
/// Uses the backend's default evaluation points for `cluster.workers`
/// workers.
///
/// # Safety
/// `problem`, `cluster` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn polylin_run_coded(
    problem: *const PolylinProblem,
    split_factor: u64,
    iterations: u64,
    phases: u64,
    cluster: *const PolylinCluster,
    out: *mut *mut PolylinRun,
) -> PolylinStatus {
    if problem.is_null() || cluster.is_null() || out.is_null() {
        return fail(PolylinStatus::NullArgument, "null argument");
    }
    let problem = unsafe { &*problem };
    let cluster = unsafe { &*cluster };
    guarded(|| {
        let n = iterations as usize;
        let ell = phases as usize;
        if ell == 0 || n % ell != 0 {
            return fail(
                PolylinStatus::InvalidArgument,
                &format!("phase count {ell} must divide the iteration count {n}"),
            );
        }
        let sys = match problem.inner.system(n) {
            Ok(sys) => sys,
            Err(e) => return fail(PolylinStatus::InvalidArgument, &e.to_string()),
        };
        let params = match CodingParams::<f64>::with_default_points(
            split_factor as usize,
            n / ell,
            cluster.workers as usize,
        ) {
            Ok(p) => p,
            Err(e) => return fail(PolylinStatus::InvalidArgument, &e.to_string()),
        };
        let cfg = cluster_config(cluster, params.recovery_threshold as u64);
        let run = if ell == 1 {
            run_polylin(&sys, &params, &cfg)
        } else {
            run_mrpolylin(&sys, &params, ell, &cfg)
        };
        finish_run(run, out)
    })
}

/// Length of the solution vector; 0 if the run stalled or the handle is null.
///
/// # Safety
/// `run` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn polylin_run_solution_len(run: *const PolylinRun) -> u64 {
    if run.is_null() {
        return 0;
    }
    match &unsafe { &*run }.inner.x {
        Some(x) => x.len() as u64,
        None => 0,
    }
}

/// 1 if the run stalled (no solution available), else 0.
///
/// # Safety
/// `run` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn polylin_run_stalled(run: *const PolylinRun) -> i32 {
    if run.is_null() {
        return 0;
    }
    unsafe { &*run }.inner.x.is_none() as i32
}

/// Copy the solution into `buf` (capacity `len` doubles).
///
/// # Safety
/// `buf` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn polylin_run_solution(
    run: *const PolylinRun,
    buf: *mut f64,
    len: u64,
) -> PolylinStatus {
    if run.is_null() || buf.is_null() {
        return fail(PolylinStatus::NullArgument, "null argument");
    }
    let run = unsafe { &*run };
    match &run.inner.x {
        Some(x) => {
            if (len as usize) < x.len() {
                return fail(
                    PolylinStatus::BufferTooSmall,
                    &format!("need {} doubles, buffer holds {len}", x.len()),
                );
            }
            let slice = unsafe { std::slice::from_raw_parts_mut(buf, x.len()) };
            for (dst, src) in slice.iter_mut().zip(x.iter()) {
                *dst = *src;
            }
            PolylinStatus::Ok
        }
        None => fail(PolylinStatus::RuntimeError, "run stalled: no solution"),
    }
}

/// Copy the run's cost ledger into `out`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polylin_run_ledger(
    run: *const PolylinRun,
    out: *mut PolylinLedger,
) -> PolylinStatus {
    if run.is_null() || out.is_null() {
        return fail(PolylinStatus::NullArgument, "null argument");
    }
    let ledger = unsafe { &*run }.inner.ledger;
    unsafe { *out = ledger.into() };
    PolylinStatus::Ok
}

/// Release a run handle. Null is ignored.
///
/// # Safety
/// `run` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn polylin_run_free(run: *mut PolylinRun) {
    if !run.is_null() {
        drop(unsafe { Box::from_raw(run) });
    }
}

/// Closed-form cost ledger for a strategy (the analytic model, no run).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn polylin_predicted_costs(
    strategy: PolylinStrategy,
    dim: u64,
    workers: u64,
    required: u64,
    iterations: u64,
    phases: u64,
    beta1: f64,
    beta2: f64,
    out: *mut PolylinLedger,
) -> PolylinStatus {
    if out.is_null() {
        return fail(PolylinStatus::NullArgument, "out is null");
    }
    let strategy = match strategy {
        PolylinStrategy::Baseline => Strategy::Baseline,
        PolylinStrategy::Polylin => Strategy::Polylin,
        PolylinStrategy::Mrpolylin => Strategy::Mrpolylin,
    };
    guarded(|| {
        match predicted_costs(
            strategy,
            dim as usize,
            workers as usize,
            required as usize,
            iterations as usize,
            phases as usize,
            beta1,
            beta2,
        ) {
            Ok(ledger) => {
                unsafe { *out = ledger.into() };
                PolylinStatus::Ok
            }
            Err(e) => fail(PolylinStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Smallest even iteration count whose error bound reaches `epsilon`, given
/// the decay rate and the eigen-projection bound of the initial error.
///
/// # Safety
/// `out_bound` and `out_iterations` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn polylin_required_iterations(
    sigma1: f64,
    dim: u64,
    max_alpha: f64,
    epsilon: f64,
    out_bound: *mut f64,
    out_iterations: *mut u64,
) -> PolylinStatus {
    if out_bound.is_null() || out_iterations.is_null() {
        return fail(PolylinStatus::NullArgument, "null argument");
    }
    match required_iterations(&ErrorBoundInputs {
        sigma1,
        dim: dim as usize,
        max_alpha,
        epsilon,
    }) {
        Ok((bound, n)) => {
            unsafe {
                *out_bound = bound;
                *out_iterations = n as u64;
            }
            PolylinStatus::Ok
        }
        Err(e) => fail(PolylinStatus::InvalidArgument, &e.to_string()),
    }
}

/// Centralized n-step reference solve (no cluster): writes the iterate into
/// `buf`, so bindings can check protocol outputs against the oracle.
///
/// # Safety
/// `problem` must be valid; `buf` must hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn polylin_problem_iterate(
    problem: *const PolylinProblem,
    iterations: u64,
    buf: *mut f64,
    len: u64,
) -> PolylinStatus {
    if problem.is_null() || buf.is_null() {
        return fail(PolylinStatus::NullArgument, "null argument");
    }
    let problem = unsafe { &*problem };
    guarded(|| {
        let sys: IterationSystem<f64> = match problem.inner.system(iterations as usize) {
            Ok(sys) => sys,
            Err(e) => return fail(PolylinStatus::InvalidArgument, &e.to_string()),
        };
        let x = polylin::solver::iterate(&sys);
        if (len as usize) < x.len() {
            return fail(
                PolylinStatus::BufferTooSmall,
                &format!("need {} doubles, buffer holds {len}", x.len()),
            );
        }
        let slice = unsafe { std::slice::from_raw_parts_mut(buf, x.len()) };
        for (dst, src) in slice.iter_mut().zip(x.iter()) {
            *dst = *src;
        }
        PolylinStatus::Ok
    })
}
