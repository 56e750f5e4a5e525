/* C interface for the polylin coded-solver library. */

#ifndef POLYLIN_H
#define POLYLIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every API call.
typedef enum PolylinStatus {
  POLYLIN_STATUS_OK = 0,
  // A required pointer argument was null.
  POLYLIN_STATUS_NULL_ARGUMENT = 1,
  // Arguments violate a precondition; see `polylin_last_error_message`.
  POLYLIN_STATUS_INVALID_ARGUMENT = 2,
  // The run could not complete (for example a baseline stall or too few
  // surviving workers to decode).
  POLYLIN_STATUS_RUNTIME_ERROR = 3,
  // An output buffer is smaller than the data it must receive.
  POLYLIN_STATUS_BUFFER_TOO_SMALL = 4,
} PolylinStatus;

// Straggler model selector for [`PolylinCluster`].
typedef enum PolylinStraggler {
  // No injected delays.
  POLYLIN_STRAGGLER_NONE = 0,
  // `delay = shift + Exp(rate)` per worker per round.
  POLYLIN_STRAGGLER_SHIFTED_EXP = 1,
  // Independent failure with probability `fail_prob` per worker per round.
  POLYLIN_STRAGGLER_FAIL = 2,
} PolylinStraggler;

// Strategy selector for `polylin_predicted_costs`.
typedef enum PolylinStrategy {
  POLYLIN_STRATEGY_BASELINE = 0,
  POLYLIN_STRATEGY_POLYLIN = 1,
  POLYLIN_STRATEGY_MRPOLYLIN = 2,
} PolylinStrategy;

// Opaque handle to a loaded or generated problem.
typedef struct PolylinProblem PolylinProblem;

// Opaque handle to a completed run.
typedef struct PolylinRun PolylinRun;

// Cluster shape and cost coefficients.
//
// `required` is the number of responders the master waits for; pass 0 to
// derive it (the recovery threshold for coded runs, the worker count for
// baseline runs).
typedef struct PolylinCluster {
  uint64_t workers;
  uint64_t required;
  double beta1;
  double beta2;
  double compute_rate;
  uint64_t seed;
  enum PolylinStraggler straggler;
  double straggler_shift;
  double straggler_rate;
  double straggler_fail_prob;
} PolylinCluster;

// Per-run cost ledger (see the library documentation for field semantics).
typedef struct PolylinLedger {
  uint64_t rounds;
  uint64_t words_down;
  uint64_t words_up;
  uint64_t worker_mults;
  uint64_t master_mults;
  uint64_t worker_storage;
  uint64_t offline_words;
  uint64_t stragglers_tolerated;
  double sim_time;
} PolylinLedger;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *polylin_version(void);

// Message describing the most recent failure on this thread. The pointer is
// valid until the next failing call on the same thread.
const char *polylin_last_error_message(void);

// Generate a random problem: symmetric matrix scaled to `target_rho`,
// identity input operator, random right-hand side, zero start vector.
//
// # Safety
// `out` must be a valid pointer; the result must be released with
// `polylin_problem_free`.
enum PolylinStatus polylin_problem_generate(uint64_t dim,
                                            double target_rho,
                                            uint64_t seed,
                                            struct PolylinProblem **out);

// Load a problem from matrix text files (`rows cols` header then row-major
// values; vectors are single-column matrices). `x0_path` may be null for a
// zero start vector.
//
// # Safety
// Paths must be NUL-terminated strings; `out` must be valid.
enum PolylinStatus polylin_problem_load(const char *a_path,
                                        const char *q_path,
                                        const char *y_path,
                                        const char *x0_path,
                                        struct PolylinProblem **out);

// Problem dimension, or 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle from this library.
uint64_t polylin_problem_dim(const struct PolylinProblem *problem);

// Release a problem handle. Null is ignored.
//
// # Safety
// `problem` must come from this library and not be freed twice.
void polylin_problem_free(struct PolylinProblem *problem);

// Run the row-banded baseline protocol for `iterations` steps.
//
// # Safety
// `problem`, `cluster` and `out` must be valid pointers.
enum PolylinStatus polylin_run_baseline(const struct PolylinProblem *problem,
                                        uint64_t iterations,
                                        const struct PolylinCluster *cluster,
                                        struct PolylinRun **out);

// Run the coded protocol: `phases == 1` is the single-round scheme, larger
// values split the iterations into that many sequential coded phases.
// Uses the backend's default evaluation points for `cluster.workers`
// workers.
//
// # Safety
// `problem`, `cluster` and `out` must be valid pointers.
enum PolylinStatus polylin_run_coded(const struct PolylinProblem *problem,
                                     uint64_t split_factor,
                                     uint64_t iterations,
                                     uint64_t phases,
                                     const struct PolylinCluster *cluster,
                                     struct PolylinRun **out);

// Length of the solution vector; 0 if the run stalled or the handle is null.
//
// # Safety
// `run` must be null or a live handle from this library.
uint64_t polylin_run_solution_len(const struct PolylinRun *run);

// 1 if the run stalled (no solution available), else 0.
//
// # Safety
// `run` must be null or a live handle from this library.
int32_t polylin_run_stalled(const struct PolylinRun *run);

// Copy the solution into `buf` (capacity `len` doubles).
//
// # Safety
// `buf` must point to at least `len` writable doubles.
enum PolylinStatus polylin_run_solution(const struct PolylinRun *run, double *buf, uint64_t len);

// Copy the run's cost ledger into `out`.
//
// # Safety
// `out` must be a valid pointer.
enum PolylinStatus polylin_run_ledger(const struct PolylinRun *run, struct PolylinLedger *out);

// Release a run handle. Null is ignored.
//
// # Safety
// `run` must come from this library and not be freed twice.
void polylin_run_free(struct PolylinRun *run);

// Closed-form cost ledger for a strategy (the analytic model, no run).
//
// # Safety
// `out` must be a valid pointer.
enum PolylinStatus polylin_predicted_costs(enum PolylinStrategy strategy,
                                           uint64_t dim,
                                           uint64_t workers,
                                           uint64_t required,
                                           uint64_t iterations,
                                           uint64_t phases,
                                           double beta1,
                                           double beta2,
                                           struct PolylinLedger *out);

// Smallest even iteration count whose error bound reaches `epsilon`, given
// the decay rate and the eigen-projection bound of the initial error.
//
// # Safety
// `out_bound` and `out_iterations` must be valid pointers.
enum PolylinStatus polylin_required_iterations(double sigma1,
                                               uint64_t dim,
                                               double max_alpha,
                                               double epsilon,
                                               double *out_bound,
                                               uint64_t *out_iterations);

// Centralized n-step reference solve (no cluster): writes the iterate into
// `buf`, so bindings can check protocol outputs against the oracle.
//
// # Safety
// `problem` must be valid; `buf` must hold at least `len` doubles.
enum PolylinStatus polylin_problem_iterate(const struct PolylinProblem *problem,
                                           uint64_t iterations,
                                           double *buf,
                                           uint64_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYLIN_H */
