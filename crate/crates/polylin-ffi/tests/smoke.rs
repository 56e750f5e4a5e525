//! Exercises the C ABI from Rust: handle lifecycle, status codes, error
//! messages, and agreement between the coded run and the reference solve.

use std::ffi::CStr;
use std::ptr;

use polylin_ffi::*;

fn quiet_cluster(workers: u64, required: u64) -> PolylinCluster {
    PolylinCluster {
        workers,
        required,
        beta1: 1.0,
        beta2: 0.01,
        compute_rate: 0.0,
        seed: 7,
        straggler: PolylinStraggler::None,
        straggler_shift: 0.0,
        straggler_rate: 1.0,
        straggler_fail_prob: 0.0,
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(polylin_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(polylin_version()) };
    assert!(!v.to_bytes().is_empty());
}

#[test]
fn coded_run_matches_reference_solve() {
    unsafe {
        let mut problem: *mut PolylinProblem = ptr::null_mut();
        let status = polylin_problem_generate(12, 0.5, 3, &mut problem);
        assert_eq!(status, PolylinStatus::Ok, "{}", last_error());
        assert_eq!(polylin_problem_dim(problem), 12);

        let cluster = quiet_cluster(10, 0); // required derived: K = 7
        let mut run: *mut PolylinRun = ptr::null_mut();
        let status = polylin_run_coded(problem, 2, 4, 1, &cluster, &mut run);
        assert_eq!(status, PolylinStatus::Ok, "{}", last_error());
        assert_eq!(polylin_run_stalled(run), 0);

        let len = polylin_run_solution_len(run) as usize;
        assert_eq!(len, 12);
        let mut got = vec![0.0f64; len];
        assert_eq!(
            polylin_run_solution(run, got.as_mut_ptr(), len as u64),
            PolylinStatus::Ok
        );

        let mut reference = vec![0.0f64; len];
        assert_eq!(
            polylin_problem_iterate(problem, 4, reference.as_mut_ptr(), len as u64),
            PolylinStatus::Ok
        );
        let num: f64 = got
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = reference.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(num / den < 1e-6, "relative error {}", num / den);

        let mut ledger = PolylinLedger::default();
        assert_eq!(polylin_run_ledger(run, &mut ledger), PolylinStatus::Ok);
        assert_eq!(ledger.rounds, 1);
        assert_eq!(ledger.words_down, 12);
        assert_eq!(ledger.words_up, 12);
        assert_eq!(ledger.stragglers_tolerated, 3);

        polylin_run_free(run);
        polylin_problem_free(problem);
    }
}

#[test]
fn baseline_and_phases_run() {
    unsafe {
        let mut problem: *mut PolylinProblem = ptr::null_mut();
        assert_eq!(
            polylin_problem_generate(8, 0.4, 5, &mut problem),
            PolylinStatus::Ok
        );

        let cluster = quiet_cluster(4, 0);
        let mut run: *mut PolylinRun = ptr::null_mut();
        assert_eq!(
            polylin_run_baseline(problem, 4, &cluster, &mut run),
            PolylinStatus::Ok,
            "{}",
            last_error()
        );
        let mut ledger = PolylinLedger::default();
        polylin_run_ledger(run, &mut ledger);
        assert_eq!(ledger.rounds, 4);
        polylin_run_free(run);

        // two coded phases
        let cluster = quiet_cluster(6, 0); // per-phase threshold 3
        let mut run: *mut PolylinRun = ptr::null_mut();
        assert_eq!(
            polylin_run_coded(problem, 2, 4, 2, &cluster, &mut run),
            PolylinStatus::Ok,
            "{}",
            last_error()
        );
        polylin_run_ledger(run, &mut ledger);
        assert_eq!(ledger.rounds, 2);
        polylin_run_free(run);

        polylin_problem_free(problem);
    }
}

#[test]
fn status_codes_and_messages() {
    unsafe {
        // null out pointer
        assert_eq!(
            polylin_problem_generate(4, 0.5, 1, ptr::null_mut()),
            PolylinStatus::NullArgument
        );

        // invalid target radius
        let mut problem: *mut PolylinProblem = ptr::null_mut();
        assert_eq!(
            polylin_problem_generate(4, 1.5, 1, &mut problem),
            PolylinStatus::InvalidArgument
        );
        assert!(last_error().contains("spectral radius"), "{}", last_error());

        // threshold exceeding workers
        assert_eq!(
            polylin_problem_generate(8, 0.5, 1, &mut problem),
            PolylinStatus::Ok
        );
        let cluster = quiet_cluster(5, 0);
        let mut run: *mut PolylinRun = ptr::null_mut();
        assert_eq!(
            polylin_run_coded(problem, 2, 4, 1, &cluster, &mut run),
            PolylinStatus::InvalidArgument
        );
        assert!(last_error().contains("7"), "{}", last_error());

        // buffer too small
        let cluster = quiet_cluster(10, 0);
        assert_eq!(
            polylin_run_coded(problem, 2, 4, 1, &cluster, &mut run),
            PolylinStatus::Ok
        );
        let mut tiny = [0.0f64; 2];
        assert_eq!(
            polylin_run_solution(run, tiny.as_mut_ptr(), 2),
            PolylinStatus::BufferTooSmall
        );
        polylin_run_free(run);

        // a failed worker stalls the baseline; the handle reports it
        let mut failing = quiet_cluster(4, 0);
        failing.straggler = PolylinStraggler::Fail;
        failing.straggler_fail_prob = 1.0;
        assert_eq!(
            polylin_run_baseline(problem, 4, &failing, &mut run),
            PolylinStatus::Ok
        );
        assert_eq!(polylin_run_stalled(run), 1);
        assert_eq!(polylin_run_solution_len(run), 0);
        assert_eq!(
            polylin_run_solution(run, tiny.as_mut_ptr(), 2),
            PolylinStatus::RuntimeError
        );
        polylin_run_free(run);

        polylin_problem_free(problem);
        // freeing null is a no-op
        polylin_problem_free(ptr::null_mut());
        polylin_run_free(ptr::null_mut());
    }
}

#[test]
fn predictions_and_bounds() {
    unsafe {
        let mut ledger = PolylinLedger::default();
        assert_eq!(
            polylin_predicted_costs(
                PolylinStrategy::Polylin,
                100,
                10,
                7,
                4,
                1,
                1.0,
                0.01,
                &mut ledger
            ),
            PolylinStatus::Ok
        );
        assert_eq!(ledger.rounds, 1);
        assert_eq!(ledger.words_down + ledger.words_up, 200);
        assert!((ledger.sim_time - 3.0).abs() < 1e-12);

        let mut bound = 0.0f64;
        let mut iterations = 0u64;
        assert_eq!(
            polylin_required_iterations(0.5, 2, 1.0, 0.01, &mut bound, &mut iterations),
            PolylinStatus::Ok
        );
        assert_eq!(iterations, 8);
        assert!((bound - 200f64.log2()).abs() < 1e-12);

        assert_eq!(
            polylin_required_iterations(1.5, 2, 1.0, 0.01, &mut bound, &mut iterations),
            PolylinStatus::InvalidArgument
        );
    }
}
