//! Compiles and runs a small C program against the generated header and the
//! static library, so the ABI is exercised from actual C.

use std::path::PathBuf;
use std::process::Command;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps/...; the staticlib sits one up
    let mut dir = std::env::current_exe().unwrap();
    dir.pop(); // test binary
    dir.pop(); // deps/
    dir
}

#[test]
fn c_program_links_and_runs() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = crate_dir.join("include");
    let lib_dir = target_dir();
    let staticlib = lib_dir.join("libpolylin_ffi.a");
    assert!(
        staticlib.exists(),
        "staticlib not found at {}",
        staticlib.display()
    );

    let scratch = tempfile_dir();
    let c_src = scratch.join("smoke.c");
    std::fs::write(
        &c_src,
        r#"
#include <stdio.h>
#include <stdlib.h>
#include "polylin.h"

int main(void) {
    PolylinProblem *problem = NULL;
    if (polylin_problem_generate(10, 0.5, 42, &problem) != POLYLIN_STATUS_OK) {
        fprintf(stderr, "generate: %s\n", polylin_last_error_message());
        return 1;
    }
    PolylinCluster cluster = {
        .workers = 10, .required = 0,
        .beta1 = 1.0, .beta2 = 0.01, .compute_rate = 0.0, .seed = 1,
        .straggler = POLYLIN_STRAGGLER_NONE,
        .straggler_shift = 0.0, .straggler_rate = 1.0, .straggler_fail_prob = 0.0,
    };
    PolylinRun *run = NULL;
    if (polylin_run_coded(problem, 2, 4, 1, &cluster, &run) != POLYLIN_STATUS_OK) {
        fprintf(stderr, "run: %s\n", polylin_last_error_message());
        return 1;
    }
    uint64_t len = polylin_run_solution_len(run);
    double *x = malloc(len * sizeof(double));
    double *ref = malloc(len * sizeof(double));
    if (polylin_run_solution(run, x, len) != POLYLIN_STATUS_OK) return 1;
    if (polylin_problem_iterate(problem, 4, ref, len) != POLYLIN_STATUS_OK) return 1;
    double num = 0.0, den = 0.0;
    for (uint64_t i = 0; i < len; i++) {
        double d = x[i] - ref[i];
        num += d * d;
        den += ref[i] * ref[i];
    }
    if (num > 1e-12 * den) {
        fprintf(stderr, "solution does not match the reference\n");
        return 1;
    }
    PolylinLedger ledger;
    if (polylin_run_ledger(run, &ledger) != POLYLIN_STATUS_OK) return 1;
    if (ledger.rounds != 1) return 1;
    free(x);
    free(ref);
    polylin_run_free(run);
    polylin_problem_free(problem);
    printf("ok\n");
    return 0;
}
"#,
    )
    .unwrap();

    let exe = scratch.join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let compile = Command::new(&cc)
        .arg(&c_src)
        .arg("-I")
        .arg(&include)
        .arg("-o")
        .arg(&exe)
        .arg(&staticlib)
        .arg("-lm")
        .arg("-lpthread")
        .arg("-ldl")
        .output()
        .expect("C compiler runs");
    assert!(
        compile.status.success(),
        "cc failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&exe).output().expect("smoke binary runs");
    assert!(
        run.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("polylin-ffi-c-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
