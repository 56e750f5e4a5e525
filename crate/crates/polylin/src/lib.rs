//! Coded distributed iterative linear-inverse solvers.
//!
//! Iterative solvers of the form `x_{k+1} = A x_k + Q y` normally need one
//! master/worker communication round per iteration. This crate implements a
//! polynomial-coding construction that collapses any even number of
//! iterations into a single round: each worker stores evaluations of a few
//! block-coefficient polynomials derived from `A` and `Q`, runs a local
//! recursion, and returns one length-`N` vector. The master interpolates the
//! results of the fastest `K = 2 m^(n/2) - 1` workers and reads the answer
//! off one polynomial coefficient, so up to `P - K` stragglers or failures
//! are tolerated outright.
//!
//! Module map:
//!
//! * [`scalar`] — exact-rational and binary64 field backends;
//! * [`linalg`] — dense matrices/vectors, block splits, zero padding;
//! * [`solver`] — the centralized reference recursion, Jacobi and
//!   gradient-descent casts, and the iteration-count bound;
//! * [`coding`] — encoder, worker recursion, interpolation decoder, plus
//!   independent oracles in [`coding::oracle`];
//! * [`sim`] — deterministic discrete-event master/worker cluster with
//!   straggler injection and exact cost accounting;
//! * [`mod@bench`] — experiment grids, problem generation, CSV/JSON reports.
//!
//! The `polylin` binary drives experiment grids from JSON configs; see the
//! repository README for the CLI and file formats.

// divisibility checks read better as `%` here
#![allow(clippy::manual_is_multiple_of)]

pub mod bench;
pub mod coding;
pub mod dd;
pub mod linalg;
pub mod scalar;
pub mod sim;
pub mod solver;

pub use coding::{
    decode, lagrange_coefficient_weights, make_shard, recovery_threshold, worker_eta, CodingParams,
    EtaEval, ShardBundle,
};
pub use linalg::{Matrix, MultMeter, Vector};
pub use scalar::{Backend, Rational, Scalar};
pub use sim::{
    predicted_costs, run_baseline, run_mrpolylin, run_polylin, ClusterConfig, CostLedger,
    RunResult, StragglerModel, Strategy,
};
pub use solver::{iterate, IterationSystem};
