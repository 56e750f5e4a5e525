//! Deterministic discrete-event master/worker cluster.
//!
//! Rounds are simulated in virtual time: every worker's task cost is counted
//! in scalar multiplies, a per-(seed, worker, round) straggler delay is added,
//! and the master proceeds once the required number of workers finished (ties
//! broken by worker index). Identical configuration and seed give bit-identical
//! results; no wall-clock threads are involved.
//!
//! Cost accounting follows the linear communication model: a round that moves
//! `B1` words to every worker and `B2` words back costs
//! `beta1 + beta2 * (B1 + B2)`, so the ledger's round count multiplies `beta1`
//! and its word counts multiply `beta2`. Word fields count scalars per worker
//! (the maximum over workers), matching that model.
//!
//! One-time shard placement is treated as offline preprocessing: it does not
//! appear in the per-round words, but its size is reported separately in
//! [`CostLedger::offline_words`] so nothing is hidden.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::{decode, make_shard_metered, worker_eta, CodingError, CodingParams, EtaEval};
use crate::linalg::{zero_pad, LinalgError, MultMeter, Vector};
use crate::scalar::Scalar;
use crate::solver::IterationSystem;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid cluster configuration: {0}")]
    BadConfig(String),
    #[error("round {round}: only {finite} workers can finish, {required} required")]
    DecodeImpossible {
        round: usize,
        finite: usize,
        required: usize,
    },
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which protocol a run or prediction refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Baseline,
    Polylin,
    Mrpolylin,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Baseline => write!(f, "baseline"),
            Strategy::Polylin => write!(f, "polylin"),
            Strategy::Mrpolylin => write!(f, "mrpolylin"),
        }
    }
}

/// Straggler injection model. Delays are drawn from a stream derived
/// deterministically from `(seed, worker, round)`, so rerunning a
/// configuration reproduces the exact same cluster behavior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StragglerModel {
    /// Every worker finishes as soon as its computation does.
    None,
    /// `delay = shift + Exp(rate)`: a minimum latency plus an exponential
    /// tail, the classic straggler shape.
    ShiftedExp { shift: f64, rate: f64 },
    /// Each worker independently fails (infinite delay) with probability
    /// `prob` per round.
    Fail { prob: f64 },
    /// The listed workers fail in every round. Used to exercise resilience
    /// exhaustively over failure subsets.
    FailWorkers { workers: Vec<usize> },
}

impl StragglerModel {
    fn validate(&self) -> Result<(), SimError> {
        match self {
            StragglerModel::None => Ok(()),
            StragglerModel::ShiftedExp { shift, rate } => {
                if *shift < 0.0 || !shift.is_finite() {
                    return Err(SimError::BadConfig("shift must be finite and >= 0".into()));
                }
                if *rate <= 0.0 || !rate.is_finite() {
                    return Err(SimError::BadConfig("rate must be finite and > 0".into()));
                }
                Ok(())
            }
            StragglerModel::Fail { prob } => {
                if !(0.0..=1.0).contains(prob) {
                    return Err(SimError::BadConfig(
                        "fail probability must be in [0,1]".into(),
                    ));
                }
                Ok(())
            }
            StragglerModel::FailWorkers { .. } => Ok(()),
        }
    }

    /// Delay for one worker in one round; `+inf` means the worker never
    /// responds.
    pub fn delay(&self, seed: u64, worker: usize, round: usize) -> f64 {
        match self {
            StragglerModel::None => 0.0,
            StragglerModel::ShiftedExp { shift, rate } => {
                // u in (0, 1]: uniform(seed, worker, round) lies in [0, 1)
                let u = 1.0 - uniform(seed, worker, round);
                shift - u.ln() / rate
            }
            StragglerModel::Fail { prob } => {
                if uniform(seed, worker, round) < *prob {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            StragglerModel::FailWorkers { workers } => {
                if workers.contains(&worker) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) from the (seed, worker, round) stream.
fn uniform(seed: u64, worker: usize, round: usize) -> f64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ (worker as u64).wrapping_add(0x517cc1b727220a95));
    h = splitmix64(h ^ (round as u64).wrapping_add(0x2545f4914f6cdd1d));
    // 53 random bits into the mantissa
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Cluster shape and cost coefficients.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Worker count P.
    pub workers: usize,
    /// Responders required per round (K); the baseline protocol requires
    /// `required == workers`.
    pub required: usize,
    /// Cost per communication round.
    pub beta1: f64,
    /// Cost per transferred scalar word.
    pub beta2: f64,
    /// Simulated seconds per scalar multiply.
    pub compute_rate: f64,
    pub straggler: StragglerModel,
    pub seed: u64,
}

impl ClusterConfig {
    fn validate(&self) -> Result<(), SimError> {
        if self.workers == 0 || self.required == 0 || self.required > self.workers {
            return Err(SimError::BadConfig(format!(
                "need 1 <= required <= workers, got required={} workers={}",
                self.required, self.workers
            )));
        }
        for (name, v) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("compute_rate", self.compute_rate),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(SimError::BadConfig(format!(
                    "{name} must be finite and >= 0"
                )));
            }
        }
        self.straggler.validate()
    }
}

/// Measured (or predicted) per-run costs. Word and storage fields count
/// scalars per worker, maximized over workers; `worker_mults` is the largest
/// per-worker multiply count; `master_mults` counts the master's shard
/// evaluations plus decoding. `offline_words` is the one-time per-worker
/// placement size (split matrices or shard plus the input vector), kept out
/// of the per-round words because it is amortized across runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
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

impl CostLedger {
    /// Linear-model communication cost:
    /// `beta1 * rounds + beta2 * (words_down + words_up)`.
    pub fn comm_cost(&self, beta1: f64, beta2: f64) -> f64 {
        beta1 * self.rounds as f64 + beta2 * (self.words_down + self.words_up) as f64
    }
}

/// Outcome of one protocol run. `x` is `None` when the run stalled (the
/// baseline with a failed worker); `responder_sets` records, per round, the
/// workers whose results the master used, in ascending index order.
#[derive(Clone, Debug)]
pub struct RunResult<S> {
    pub x: Option<Vector<S>>,
    pub ledger: CostLedger,
    pub responder_sets: Vec<Vec<usize>>,
}

impl<S: Scalar> RunResult<S> {
    /// Flat JSON object: the solution (as backend text), every ledger field,
    /// and the responder sets.
    pub fn to_json(&self) -> serde_json::Value {
        let ledger = serde_json::to_value(self.ledger).expect("plain fields");
        let mut map = match ledger {
            serde_json::Value::Object(map) => map,
            _ => unreachable!("ledger serializes to an object"),
        };
        map.insert(
            "x".into(),
            match &self.x {
                Some(x) => serde_json::Value::Array(
                    x.iter()
                        .map(|v| serde_json::Value::String(v.to_string()))
                        .collect(),
                ),
                None => serde_json::Value::Null,
            },
        );
        map.insert(
            "responder_sets".into(),
            serde_json::to_value(&self.responder_sets).expect("plain fields"),
        );
        serde_json::Value::Object(map)
    }
}

/// Finish times for one round and the fastest-K selection.
///
/// `finish(w) = compute_rate * task_mults[w] + delay(seed, w, round)`;
/// responders are the `required` smallest finish times with ties broken by
/// lower worker index, and the elapsed time is the largest finish time among
/// them (the K-th order statistic).
pub fn simulate_round(
    task_mults: &[u64],
    cfg: &ClusterConfig,
    round: usize,
) -> Result<(Vec<usize>, f64), SimError> {
    assert_eq!(task_mults.len(), cfg.workers, "one task cost per worker");
    let mut finish: Vec<(f64, usize)> = task_mults
        .iter()
        .enumerate()
        .map(|(w, &mults)| {
            let t = cfg.compute_rate * mults as f64 + cfg.straggler.delay(cfg.seed, w, round);
            (t, w)
        })
        .collect();
    finish.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let chosen = &finish[..cfg.required];
    let finite = finish.iter().take_while(|(t, _)| t.is_finite()).count();
    if chosen.iter().any(|(t, _)| !t.is_finite()) {
        return Err(SimError::DecodeImpossible {
            round,
            finite,
            required: cfg.required,
        });
    }
    let elapsed = chosen.last().expect("required >= 1").0;
    let mut responders: Vec<usize> = chosen.iter().map(|&(_, w)| w).collect();
    responders.sort_unstable();
    Ok((responders, elapsed))
}

// ---------------------------------------------------------------------------
// Baseline protocol
// ---------------------------------------------------------------------------

/// Row-banded data-parallel execution: each of the P workers stores one row
/// band of `A` and `Q`, every iteration is one broadcast/gather round, and
/// the master must hear from every worker. Any failed worker stalls the run:
/// `x` comes back `None` with infinite simulated time.
pub fn run_baseline<S: Scalar>(
    sys: &IterationSystem<S>,
    cfg: &ClusterConfig,
) -> Result<RunResult<S>, SimError> {
    cfg.validate()?;
    if cfg.required != cfg.workers {
        return Err(SimError::BadConfig(
            "the baseline protocol waits for every worker (required must equal workers)".into(),
        ));
    }
    let p = cfg.workers;
    let padded = zero_pad(&sys.a, &sys.q, &sys.x0, &sys.y, p)?;
    let dim = padded.a.rows();
    let band = dim / p;

    let a_bands = crate::linalg::split_horizontal(&padded.a, p)?;
    let q_bands = crate::linalg::split_horizontal(&padded.q, p)?;

    let mut ledger = CostLedger {
        worker_storage: 2 * (band * dim) as u64,
        offline_words: 2 * (band * dim) as u64 + dim as u64,
        stragglers_tolerated: 0,
        ..CostLedger::default()
    };
    let mut responder_sets = Vec::with_capacity(sys.iterations);
    let mut worker_mults = vec![0u64; p];
    let mut cached_qy: Vec<Option<Vector<S>>> = vec![None; p];
    let mut x = padded.x0.clone();

    for round in 0..sys.iterations {
        ledger.rounds += 1;
        ledger.words_down += dim as u64;
        let mut slices: Vec<Vector<S>> = Vec::with_capacity(p);
        let mut task_mults = vec![0u64; p];
        for w in 0..p {
            let mut meter = MultMeter::new();
            if cached_qy[w].is_none() {
                cached_qy[w] = Some(q_bands.blocks[w].mat_vec_metered(&padded.y, &mut meter)?);
            }
            let qy = cached_qy[w].as_ref().expect("just cached");
            // A_i x contributes exactly zero when x is zero; skip the work
            let slice = if x.is_zero() {
                qy.clone()
            } else {
                a_bands.blocks[w].mat_vec_metered(&x, &mut meter)?.add(qy)
            };
            slices.push(slice);
            task_mults[w] = meter.mults;
            worker_mults[w] += meter.mults;
        }
        match simulate_round(&task_mults, cfg, round) {
            Ok((responders, elapsed)) => {
                ledger.words_up += band as u64;
                ledger.sim_time += cfg.beta1 + cfg.beta2 * (dim + band) as f64 + elapsed;
                responder_sets.push(responders);
            }
            Err(SimError::DecodeImpossible { .. }) => {
                ledger.sim_time = f64::INFINITY;
                ledger.worker_mults = worker_mults.iter().copied().max().unwrap_or(0);
                return Ok(RunResult {
                    x: None,
                    ledger,
                    responder_sets,
                });
            }
            Err(e) => return Err(e),
        }
        // commit in worker-index order
        let mut data = Vec::with_capacity(dim);
        for slice in &slices {
            data.extend(slice.iter().cloned());
        }
        x = Vector::from_vec(data);
    }

    ledger.worker_mults = worker_mults.iter().copied().max().unwrap_or(0);
    Ok(RunResult {
        x: Some(x.truncated(padded.original_n)),
        ledger,
        responder_sets,
    })
}

// ---------------------------------------------------------------------------
// Coded protocols
// ---------------------------------------------------------------------------

/// Single-round coded execution: shards are placed offline, the round
/// broadcasts the start vector, each worker runs the evaluation recursion,
/// and the master decodes from the fastest K responders. Up to `P - K`
/// workers may fail without affecting the result.
pub fn run_polylin<S: Scalar>(
    sys: &IterationSystem<S>,
    params: &CodingParams<S>,
    cfg: &ClusterConfig,
) -> Result<RunResult<S>, SimError> {
    if params.iterations != sys.iterations {
        return Err(SimError::BadConfig(format!(
            "coding parameters cover {} iterations, system asks for {}",
            params.iterations, sys.iterations
        )));
    }
    run_coded_phases(sys, params, 1, cfg)
}

/// Multi-round trade-off: `ell` sequential phases of the coded protocol,
/// each advancing `n / ell` iterations, decoding the intermediate state
/// between phases. More rounds, smaller shards per worker.
pub fn run_mrpolylin<S: Scalar>(
    sys: &IterationSystem<S>,
    phase_params: &CodingParams<S>,
    ell: usize,
    cfg: &ClusterConfig,
) -> Result<RunResult<S>, SimError> {
    if ell == 0 || sys.iterations % ell != 0 {
        return Err(SimError::BadConfig(format!(
            "phase count {ell} must divide the iteration count {}",
            sys.iterations
        )));
    }
    let per_phase = sys.iterations / ell;
    if phase_params.iterations != per_phase {
        return Err(SimError::BadConfig(format!(
            "phase parameters cover {} iterations, phases need {per_phase}",
            phase_params.iterations
        )));
    }
    run_coded_phases(sys, phase_params, ell, cfg)
}

fn run_coded_phases<S: Scalar>(
    sys: &IterationSystem<S>,
    params: &CodingParams<S>,
    ell: usize,
    cfg: &ClusterConfig,
) -> Result<RunResult<S>, SimError> {
    cfg.validate()?;
    if params.workers() != cfg.workers {
        return Err(SimError::BadConfig(format!(
            "{} evaluation points for {} workers",
            params.workers(),
            cfg.workers
        )));
    }
    if cfg.required != params.recovery_threshold {
        return Err(SimError::BadConfig(format!(
            "cluster waits for {} responders but the code needs exactly {}",
            cfg.required, params.recovery_threshold
        )));
    }
    let m = params.split_factor;
    let n_phase = params.iterations;
    let p = cfg.workers;
    let padded = zero_pad(&sys.a, &sys.q, &sys.x0, &sys.y, m)?;
    let dim = padded.a.rows();

    let mut master_meter = MultMeter::new();
    let shards: Vec<_> = (0..p)
        .map(|w| make_shard_metered(&padded.a, &padded.q, params, w, &mut master_meter))
        .collect::<Result<_, _>>()?;

    let mut ledger = CostLedger {
        worker_storage: shards[0].word_count(),
        offline_words: shards[0].word_count() + dim as u64,
        stragglers_tolerated: (p - params.recovery_threshold) as u64,
        ..CostLedger::default()
    };
    let mut responder_sets = Vec::with_capacity(ell);
    let mut worker_mults = vec![0u64; p];
    let mut x = padded.x0.clone();

    for phase in 0..ell {
        ledger.rounds += 1;
        ledger.words_down += dim as u64;
        let mut task_mults = vec![0u64; p];
        let mut etas: Vec<EtaEval<S>> = Vec::with_capacity(p);
        for (w, shard) in shards.iter().enumerate() {
            let mut meter = MultMeter::new();
            etas.push(worker_eta(shard, &x, &padded.y, m, n_phase, &mut meter));
            task_mults[w] = meter.mults;
            worker_mults[w] += meter.mults;
        }
        let (responders, elapsed) = simulate_round(&task_mults, cfg, phase)?;
        let chosen: Vec<EtaEval<S>> = responders.iter().map(|&w| etas[w].clone()).collect();
        x = decode(&chosen, m, n_phase, dim, &mut master_meter)?;
        ledger.words_up += dim as u64;
        ledger.sim_time += cfg.beta1 + cfg.beta2 * (2 * dim) as f64 + elapsed;
        responder_sets.push(responders);
    }

    ledger.worker_mults = worker_mults.iter().copied().max().unwrap_or(0);
    ledger.master_mults = master_meter.mults;
    Ok(RunResult {
        x: Some(x.truncated(padded.original_n)),
        ledger,
        responder_sets,
    })
}

// ---------------------------------------------------------------------------
// Analytic cost model
// ---------------------------------------------------------------------------

/// Recover the split factor from a recovery threshold `k = 2 m^(n/2) - 1`.
pub fn split_factor_from_threshold(k: usize, iterations: usize) -> Result<usize, SimError> {
    if iterations < 2 || iterations % 2 != 0 {
        return Err(SimError::BadConfig(format!(
            "iteration count must be even and >= 2, got {iterations}"
        )));
    }
    if k % 2 == 0 {
        return Err(SimError::BadConfig(format!(
            "recovery threshold must be odd, got {k}"
        )));
    }
    let half = (iterations / 2) as u32;
    let target = (k as u64).div_ceil(2);
    let guess = (target as f64).powf(1.0 / half as f64).round() as u64;
    for m in guess.saturating_sub(1)..=guess + 1 {
        if m >= 1 && m.checked_pow(half) == Some(target) {
            return Ok(m as usize);
        }
    }
    Err(SimError::BadConfig(format!(
        "no integer split factor gives threshold {k} at {iterations} iterations"
    )))
}

/// Closed-form ledger for a strategy, matching what a straggler-free run
/// measures for rounds, word counts, and storage. `worker_mults` carries the
/// leading analytic term (`n N^2 / P` for the baseline, `n N^2 / m` per
/// coded worker with the zero start vector); measured runs stay within a
/// small bookkeeping factor of it. `sim_time` reports the linear-model
/// communication cost; `master_mults` is left at zero (decoding and shard
/// evaluation are measured, not modeled).
#[allow(clippy::too_many_arguments)]
pub fn predicted_costs(
    strategy: Strategy,
    dim: usize,
    workers: usize,
    required: usize,
    iterations: usize,
    ell: usize,
    beta1: f64,
    beta2: f64,
) -> Result<CostLedger, SimError> {
    if dim == 0 || workers == 0 {
        return Err(SimError::BadConfig(
            "dim and workers must be positive".into(),
        ));
    }
    let n = iterations as u64;
    let dim64 = dim as u64;
    let mut ledger = match strategy {
        Strategy::Baseline => {
            if required != workers {
                return Err(SimError::BadConfig(
                    "baseline requires required == workers".into(),
                ));
            }
            if dim % workers != 0 {
                return Err(SimError::BadConfig(format!(
                    "baseline formulas need workers ({workers}) to divide the padded size ({dim})"
                )));
            }
            if iterations == 0 {
                return Err(SimError::BadConfig("need at least one iteration".into()));
            }
            let p = workers as u64;
            CostLedger {
                rounds: n,
                words_down: n * dim64,
                words_up: n * dim64 / p,
                worker_mults: n * dim64 * dim64 / p,
                worker_storage: 2 * dim64 * dim64 / p,
                offline_words: 2 * dim64 * dim64 / p + dim64,
                stragglers_tolerated: 0,
                ..CostLedger::default()
            }
        }
        Strategy::Polylin | Strategy::Mrpolylin => {
            let ell = if strategy == Strategy::Polylin {
                1
            } else {
                ell
            };
            if ell == 0 || iterations % ell != 0 {
                return Err(SimError::BadConfig(format!(
                    "phase count {ell} must divide the iteration count {iterations}"
                )));
            }
            let per_phase = iterations / ell;
            let m = split_factor_from_threshold(required, per_phase)? as u64;
            if required > workers {
                return Err(SimError::BadConfig(format!(
                    "recovery threshold {required} exceeds worker count {workers}"
                )));
            }
            if dim as u64 % m != 0 {
                return Err(SimError::BadConfig(format!(
                    "coded formulas need the split factor ({m}) to divide the padded size ({dim})"
                )));
            }
            let ell64 = ell as u64;
            let per_phase64 = per_phase as u64;
            CostLedger {
                rounds: ell64,
                words_down: ell64 * dim64,
                words_up: ell64 * dim64,
                worker_mults: n * dim64 * dim64 / m,
                worker_storage: (per_phase64 + 1) * dim64 * dim64 / m + per_phase64 * m / 2,
                offline_words: (per_phase64 + 1) * dim64 * dim64 / m + per_phase64 * m / 2 + dim64,
                stragglers_tolerated: (workers - required) as u64,
                ..CostLedger::default()
            }
        }
    };
    ledger.sim_time = ledger.comm_cost(beta1, beta2);
    Ok(ledger)
}
