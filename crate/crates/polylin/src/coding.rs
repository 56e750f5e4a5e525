//! Polynomial encoding, the per-worker evaluation recursion, and the
//! interpolation decoder.
//!
//! The construction: split `A` into `m` column blocks and `m` row blocks,
//! `Q` and `I` into `m` row blocks, and form the block-coefficient
//! polynomials
//!
//! ```text
//! a1(x) = sum_j A1j x^j          (N x N/m, ascending)
//! a2(x) = sum_j A2j x^(m-1-j)    (N/m x N, descending)
//! q2(x) = sum_j Q2j x^(m-1-j)    (N/m x N, descending)
//! id(x) = sum_j Ij^T x^j         (N x N/m, ascending; applied sparsely)
//! ```
//!
//! `a1(x) a2(x)` carries `A^2` as its middle coefficient and
//! `a1(x) q2(x)` carries `AQ`. A worker holding the evaluations of these
//! polynomials at one point `xi` (and at its power tower `xi^(m^(L-1))`)
//! can run a recursion whose output `eta(xi)` is the evaluation of one fixed
//! polynomial of degree `2 m^(n/2) - 2` in `xi`; the coefficient of
//! `xi^(m^(n/2) - 1)` of that polynomial is exactly the n-step solver state
//! `A^n x0 + (A^(n-1) + ... + I) Q y`. Any `K = 2 m^(n/2) - 1` distinct
//! evaluations therefore determine the answer, which is what makes the
//! scheme tolerate `P - K` stragglers.
//!
//! The identity-block polynomial is never materialized: its evaluation acts
//! on a length `N/m` vector by stacking `m` scaled copies, so only the `m`
//! scale factors are stored and each application costs `O(N)`.

use std::any::Any;

use thiserror::Error;

use crate::dd::{dot_f64_dd, Dd};
use crate::linalg::{
    split_horizontal, split_vertical, BlockSplit, LinalgError, Matrix, MultMeter, Vector,
};
use crate::scalar::{Backend, Rational, Scalar, ScalarError};

pub mod oracle;

#[derive(Debug, Error)]
pub enum CodingError {
    #[error("invalid coding parameters: {0}")]
    BadParams(String),
    #[error("evaluation points must be distinct (points {i} and {j} are equal)")]
    DuplicatePoint { i: usize, j: usize },
    #[error("evaluation point {index} is zero")]
    ZeroPoint { index: usize },
    #[error("need {need} evaluation points, have {have}")]
    TooFewPoints { have: usize, need: usize },
    #[error("worker index {index} out of range for {workers} workers")]
    WorkerIndex { index: usize, workers: usize },
    #[error("decoder needs exactly {need} evaluations, got {got}")]
    WrongEvalCount { got: usize, need: usize },
    #[error("symbolic oracle cap exceeded: m^(n/2) = {value} > {cap}")]
    CapExceeded { value: u64, cap: u64 },
    #[error("malformed shard bytes: {0}")]
    Codec(String),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `K = 2 m^(n/2) - 1`: the number of worker outputs the decoder needs.
pub fn recovery_threshold(split_factor: usize, iterations: usize) -> Result<usize, CodingError> {
    if split_factor == 0 {
        return Err(CodingError::BadParams("split factor must be >= 1".into()));
    }
    if iterations < 2 || iterations % 2 != 0 {
        return Err(CodingError::BadParams(format!(
            "iteration count must be even and >= 2, got {iterations}"
        )));
    }
    let half = (iterations / 2) as u32;
    let tower = (split_factor as u64)
        .checked_pow(half)
        .and_then(|v| v.checked_mul(2))
        .and_then(|v| v.checked_sub(1))
        .ok_or_else(|| {
            CodingError::BadParams(format!(
                "recovery threshold 2*{split_factor}^{half}-1 overflows"
            ))
        })?;
    usize::try_from(tower).map_err(|_| {
        CodingError::BadParams(format!(
            "recovery threshold 2*{split_factor}^{half}-1 exceeds usize"
        ))
    })
}

/// Code parameters: the split factor, the (even) iteration count, the
/// derived recovery threshold, and one distinct nonzero evaluation point per
/// worker. The user supplies `(m, n)` and the threshold is derived, which
/// keeps every parameter combination valid by construction.
#[derive(Clone, Debug)]
pub struct CodingParams<S> {
    pub split_factor: usize,
    pub iterations: usize,
    pub recovery_threshold: usize,
    pub eval_points: Vec<S>,
}

impl<S: Scalar> CodingParams<S> {
    pub fn new(
        split_factor: usize,
        iterations: usize,
        eval_points: Vec<S>,
    ) -> Result<Self, CodingError> {
        let k = recovery_threshold(split_factor, iterations)?;
        if eval_points.len() < k {
            return Err(CodingError::TooFewPoints {
                have: eval_points.len(),
                need: k,
            });
        }
        validate_points(&eval_points)?;
        Ok(CodingParams {
            split_factor,
            iterations,
            recovery_threshold: k,
            eval_points,
        })
    }

    /// Backend-default points for `workers` workers.
    pub fn with_default_points(
        split_factor: usize,
        iterations: usize,
        workers: usize,
    ) -> Result<Self, CodingError> {
        CodingParams::new(split_factor, iterations, S::default_eval_points(workers))
    }

    pub fn workers(&self) -> usize {
        self.eval_points.len()
    }
}

fn validate_points<S: Scalar>(points: &[S]) -> Result<(), CodingError> {
    for (i, p) in points.iter().enumerate() {
        if p.is_zero() {
            return Err(CodingError::ZeroPoint { index: i });
        }
        for (j, q) in points.iter().enumerate().skip(i + 1) {
            if p == q {
                return Err(CodingError::DuplicatePoint { i, j });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Split-polynomial evaluation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalOrder {
    /// `sum_j block_j * xi^j`
    Ascending,
    /// `sum_j block_j * xi^(m-1-j)`
    Descending,
}

/// Horner evaluation of a block-coefficient polynomial.
pub fn eval_split_poly<S: Scalar>(blocks: &BlockSplit<S>, xi: &S, order: EvalOrder) -> Matrix<S> {
    eval_split_poly_metered(blocks, xi, order, &mut MultMeter::new())
}

pub(crate) fn eval_split_poly_metered<S: Scalar>(
    blocks: &BlockSplit<S>,
    xi: &S,
    order: EvalOrder,
    meter: &mut MultMeter,
) -> Matrix<S> {
    assert!(!blocks.blocks.is_empty(), "empty block split");
    let idx = |j: usize| match order {
        EvalOrder::Ascending => blocks.m - 1 - j,
        EvalOrder::Descending => j,
    };
    // Horner over the block with the highest power first.
    let mut acc = blocks.blocks[idx(0)].clone();
    for j in 1..blocks.m {
        meter.add(acc.rows() as u64 * acc.cols() as u64);
        acc = acc.scale(xi).add(&blocks.blocks[idx(j)]);
    }
    acc
}

// ---------------------------------------------------------------------------
// Shards
// ---------------------------------------------------------------------------

/// Per-tower-level polynomial evaluations a worker stores.
#[derive(Clone, Debug, PartialEq)]
pub struct ShardLevel<S> {
    /// `a1(t)` where `t = xi^(m^(L-1))`; `N x N/m`.
    pub eval_a1: Matrix<S>,
    /// `a2(t)`; `N/m x N`.
    pub eval_a2: Matrix<S>,
    /// `t^0 .. t^(m-1)`: the sparse representation of the identity-block
    /// polynomial at `t`. Applying it to a length `N/m` vector stacks `m`
    /// scaled copies.
    pub identity_scales: Vec<S>,
}

/// Everything one worker stores after preprocessing: evaluations of the four
/// split polynomials at its point and at the point's power tower.
#[derive(Clone, Debug, PartialEq)]
pub struct ShardBundle<S> {
    pub worker_index: usize,
    pub xi: S,
    /// One entry per tower level `L = 1 ..= n/2`.
    pub levels: Vec<ShardLevel<S>>,
    /// `q2(xi)`; `N/m x N`. Only needed at level 1.
    pub eval_q2: Matrix<S>,
}

impl<S: Scalar> ShardBundle<S> {
    /// Scalar words a worker stores; feeds the storage column of the ledger.
    pub fn word_count(&self) -> u64 {
        let mat = |m: &Matrix<S>| m.rows() as u64 * m.cols() as u64;
        let mut words = mat(&self.eval_q2);
        for level in &self.levels {
            words += mat(&level.eval_a1) + mat(&level.eval_a2);
            words += level.identity_scales.len() as u64;
        }
        words
    }

    pub fn padded_dim(&self) -> usize {
        self.eval_q2.cols()
    }

    /// Binary serialization: magic `PLSB`, version byte, scalar backend tag,
    /// a little-endian u64 payload length, then the payload (worker index,
    /// `xi`, `q2` evaluation, level count, and per level the two matrix
    /// evaluations plus the identity scale factors). Matrices are stored as
    /// `rows u64, cols u64` followed by row-major scalars; scalars use the
    /// backend codec (8-byte IEEE 754 or length-prefixed big integers).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        payload.extend_from_slice(&(self.worker_index as u64).to_le_bytes());
        self.xi.encode(&mut payload);
        encode_matrix(&self.eval_q2, &mut payload);
        payload.extend_from_slice(&(self.levels.len() as u64).to_le_bytes());
        for level in &self.levels {
            encode_matrix(&level.eval_a1, &mut payload);
            encode_matrix(&level.eval_a2, &mut payload);
            payload.extend_from_slice(&(level.identity_scales.len() as u64).to_le_bytes());
            for s in &level.identity_scales {
                s.encode(&mut payload);
            }
        }
        let mut out = Vec::with_capacity(payload.len() + 14);
        out.extend_from_slice(b"PLSB");
        out.push(1); // version
        out.push(S::BACKEND.tag());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodingError> {
        let mut input = bytes;
        if input.len() < 14 || &input[..4] != b"PLSB" {
            return Err(CodingError::Codec("bad magic".into()));
        }
        if input[4] != 1 {
            return Err(CodingError::Codec(format!("unknown version {}", input[4])));
        }
        let tag = input[5];
        if Backend::from_tag(tag) != Some(S::BACKEND) {
            return Err(CodingError::Codec(format!(
                "backend tag {tag} does not match the requested scalar type"
            )));
        }
        input = &input[6..];
        let payload_len = read_u64(&mut input)? as usize;
        if input.len() != payload_len {
            return Err(CodingError::Codec(format!(
                "payload length {} does not match header {payload_len}",
                input.len()
            )));
        }
        let worker_index = read_u64(&mut input)? as usize;
        let xi = S::decode(&mut input)?;
        let eval_q2 = decode_matrix(&mut input)?;
        let level_count = read_u64(&mut input)? as usize;
        let mut levels = Vec::with_capacity(level_count);
        for _ in 0..level_count {
            let eval_a1 = decode_matrix(&mut input)?;
            let eval_a2 = decode_matrix(&mut input)?;
            let scale_count = read_u64(&mut input)? as usize;
            let mut identity_scales = Vec::with_capacity(scale_count);
            for _ in 0..scale_count {
                identity_scales.push(S::decode(&mut input)?);
            }
            levels.push(ShardLevel {
                eval_a1,
                eval_a2,
                identity_scales,
            });
        }
        if !input.is_empty() {
            return Err(CodingError::Codec(format!(
                "{} trailing bytes",
                input.len()
            )));
        }
        Ok(ShardBundle {
            worker_index,
            xi,
            levels,
            eval_q2,
        })
    }
}

fn encode_matrix<S: Scalar>(m: &Matrix<S>, out: &mut Vec<u8>) {
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for entry in m.data() {
        entry.encode(out);
    }
}

fn decode_matrix<S: Scalar>(input: &mut &[u8]) -> Result<Matrix<S>, CodingError> {
    let rows = read_u64(input)? as usize;
    let cols = read_u64(input)? as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| CodingError::Codec("matrix dims overflow".into()))?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        data.push(S::decode(input)?);
    }
    Ok(Matrix::from_vec(rows, cols, data)?)
}

fn read_u64(input: &mut &[u8]) -> Result<u64, CodingError> {
    if input.len() < 8 {
        return Err(CodingError::Codec("truncated integer".into()));
    }
    let v = u64::from_le_bytes(input[..8].try_into().unwrap());
    *input = &input[8..];
    Ok(v)
}

/// Build the shard for one worker: evaluate the split polynomials at
/// `xi^(m^(L-1))` for every level `L`. `a` and `q` must already be padded so
/// the split factor divides their size.
///
/// Over the float backend the evaluations are carried in double-double and
/// rounded once, so each stored entry is a correctly-rounded binary64 value
/// of the intended real; see the module notes on decoder conditioning.
pub fn make_shard<S: Scalar>(
    a: &Matrix<S>,
    q: &Matrix<S>,
    params: &CodingParams<S>,
    worker_index: usize,
) -> Result<ShardBundle<S>, CodingError> {
    make_shard_metered(a, q, params, worker_index, &mut MultMeter::new())
}

pub fn make_shard_metered<S: Scalar>(
    a: &Matrix<S>,
    q: &Matrix<S>,
    params: &CodingParams<S>,
    worker_index: usize,
    meter: &mut MultMeter,
) -> Result<ShardBundle<S>, CodingError> {
    if worker_index >= params.workers() {
        return Err(CodingError::WorkerIndex {
            index: worker_index,
            workers: params.workers(),
        });
    }
    if !a.is_square() || !q.is_square() || a.rows() != q.rows() {
        return Err(LinalgError::Dim(format!(
            "expected equal square matrices, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            q.rows(),
            q.cols()
        ))
        .into());
    }
    let m = params.split_factor;
    let a1 = split_vertical(a, m)?;
    let a2 = split_horizontal(a, m)?;
    let q2 = split_horizontal(q, m)?;
    let xi = params.eval_points[worker_index].clone();

    if S::BACKEND == Backend::Float {
        if let Some(shard) = make_shard_f64(&a1, &a2, &q2, &xi, params, worker_index, meter) {
            return Ok(shard);
        }
    }

    let half = params.iterations / 2;
    let mut levels = Vec::with_capacity(half);
    let mut tower = xi.clone();
    for level in 0..half {
        if level > 0 {
            tower = pow_metered(&tower, m as u64, meter);
        }
        levels.push(ShardLevel {
            eval_a1: eval_split_poly_metered(&a1, &tower, EvalOrder::Ascending, meter),
            eval_a2: eval_split_poly_metered(&a2, &tower, EvalOrder::Descending, meter),
            identity_scales: power_ladder(&tower, m, meter),
        });
    }
    let eval_q2 = eval_split_poly_metered(&q2, &xi, EvalOrder::Descending, meter);
    Ok(ShardBundle {
        worker_index,
        xi,
        levels,
        eval_q2,
    })
}

/// `[t^0, t^1, ..., t^(m-1)]`.
fn power_ladder<S: Scalar>(t: &S, m: usize, meter: &mut MultMeter) -> Vec<S> {
    let mut scales = Vec::with_capacity(m);
    scales.push(S::one());
    for j in 1..m {
        if j == 1 {
            scales.push(t.clone());
        } else {
            meter.add(1);
            scales.push(scales[j - 1].clone() * t.clone());
        }
    }
    scales
}

fn pow_metered<S: Scalar>(base: &S, mut e: u64, meter: &mut MultMeter) -> S {
    let mut base = base.clone();
    let mut acc = S::one();
    while e > 0 {
        if e & 1 == 1 {
            meter.add(1);
            acc = acc * base.clone();
        }
        e >>= 1;
        if e > 0 {
            meter.add(1);
            base = base.clone() * base;
        }
    }
    acc
}

// --- float shard build (double-double internals, f64 storage) ---

fn make_shard_f64<S: Scalar>(
    a1: &BlockSplit<S>,
    a2: &BlockSplit<S>,
    q2: &BlockSplit<S>,
    xi: &S,
    params: &CodingParams<S>,
    worker_index: usize,
    meter: &mut MultMeter,
) -> Option<ShardBundle<S>> {
    let a1 = (a1 as &dyn Any).downcast_ref::<BlockSplit<f64>>()?;
    let a2 = (a2 as &dyn Any).downcast_ref::<BlockSplit<f64>>()?;
    let q2 = (q2 as &dyn Any).downcast_ref::<BlockSplit<f64>>()?;
    let xi = *(xi as &dyn Any).downcast_ref::<f64>()?;
    let m = params.split_factor;
    let half = params.iterations / 2;

    let horner = |blocks: &BlockSplit<f64>, t: Dd, order: EvalOrder, meter: &mut MultMeter| {
        let idx = |j: usize| match order {
            EvalOrder::Ascending => blocks.m - 1 - j,
            EvalOrder::Descending => j,
        };
        let first = &blocks.blocks[idx(0)];
        let (rows, cols) = (first.rows(), first.cols());
        let mut acc: Vec<Dd> = first.data().iter().map(|&v| Dd::from_f64(v)).collect();
        for j in 1..blocks.m {
            meter.add(rows as u64 * cols as u64);
            let block = &blocks.blocks[idx(j)];
            for (cell, &b) in acc.iter_mut().zip(block.data().iter()) {
                *cell = (*cell * t).add_f64(b);
            }
        }
        Matrix::from_vec(rows, cols, acc.into_iter().map(Dd::to_f64).collect()).expect("shape")
    };

    let mut levels = Vec::with_capacity(half);
    let mut tower = Dd::from_f64(xi);
    for level in 0..half {
        if level > 0 {
            // mirrors the generic path's pow_metered count for exponent m
            let mut e = m as u64;
            while e > 0 {
                if e & 1 == 1 {
                    meter.add(1);
                }
                e >>= 1;
                if e > 0 {
                    meter.add(1);
                }
            }
            tower = tower.pow_u64(m as u64);
        }
        let mut scales = Vec::with_capacity(m);
        scales.push(1.0);
        for j in 1..m {
            if j > 1 {
                meter.add(1);
            }
            scales.push(tower.pow_u64(j as u64).to_f64());
        }
        levels.push(ShardLevel {
            eval_a1: horner(a1, tower, EvalOrder::Ascending, meter),
            eval_a2: horner(a2, tower, EvalOrder::Descending, meter),
            identity_scales: scales,
        });
    }
    let eval_q2 = horner(q2, Dd::from_f64(xi), EvalOrder::Descending, meter);

    let shard = ShardBundle {
        worker_index,
        xi,
        levels,
        eval_q2,
    };
    let boxed: Box<dyn Any> = Box::new(shard);
    Some(*boxed.downcast::<ShardBundle<S>>().expect("S == f64"))
}

// ---------------------------------------------------------------------------
// Sparse identity application
// ---------------------------------------------------------------------------

/// Apply the identity-block polynomial evaluation to a length `N/m` vector:
/// output block `j` is `scales[j] * v`. Reproduces the dense product without
/// storing the `N x N/m` matrix.
pub fn apply_identity_scales<S: Scalar>(scales: &[S], v: &Vector<S>) -> Vector<S> {
    apply_identity_scales_metered(scales, v, &mut MultMeter::new())
}

pub(crate) fn apply_identity_scales_metered<S: Scalar>(
    scales: &[S],
    v: &Vector<S>,
    meter: &mut MultMeter,
) -> Vector<S> {
    let mut out = Vec::with_capacity(scales.len() * v.len());
    for (j, s) in scales.iter().enumerate() {
        if j == 0 {
            // scales[0] is always 1
            out.extend(v.iter().cloned());
        } else {
            meter.add(v.len() as u64);
            out.extend(v.iter().map(|x| x.clone() * s.clone()));
        }
    }
    Vector::from_vec(out)
}

// ---------------------------------------------------------------------------
// Worker recursion
// ---------------------------------------------------------------------------

/// One worker's output: the evaluation of the coded polynomial at its point.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaEval<S> {
    pub xi: S,
    pub value: Vector<S>,
}

/// Run the per-worker recursion and return `eta(xi)`.
///
/// Two chains are interleaved: the `r` chain applies alternating `a2`/`a1`
/// evaluations to `x0`, and the `w` chain applies the same operators to
/// `q2(xi) y`, with a scaled snapshot of the `w` state folded into an
/// accumulator `s` every second step. The output is `r + s`.
///
/// When `x0` is the zero vector the `r` chain is skipped outright: its value
/// is identically zero whatever the shard holds, so no multiplies are
/// charged for it. With the standard zero initialization the per-worker cost
/// is `n * N^2 / m` multiplies plus `O(nN)` bookkeeping.
pub fn worker_eta<S: Scalar>(
    shard: &ShardBundle<S>,
    x0: &Vector<S>,
    y: &Vector<S>,
    split_factor: usize,
    iterations: usize,
    meter: &mut MultMeter,
) -> EtaEval<S> {
    let n = iterations;
    let m = split_factor;
    assert!(
        n >= 2 && n % 2 == 0,
        "iteration count must be even and >= 2"
    );
    assert_eq!(shard.levels.len(), n / 2, "shard level count mismatch");
    let dim = shard.padded_dim();
    assert_eq!(x0.len(), dim, "x0 length mismatch");
    assert_eq!(y.len(), dim, "y length mismatch");
    assert!(
        shard.levels.iter().all(|l| l.identity_scales.len() == m),
        "shard split factor mismatch"
    );

    if S::BACKEND == Backend::Float {
        if let Some(value) = worker_eta_f64(shard, x0, y, m, n, meter) {
            return EtaEval {
                xi: shard.xi.clone(),
                value,
            };
        }
    }

    let half = n / 2;
    let top = (m as u64).pow(half as u32);
    let skip_r = x0.is_zero();

    let mv = |mat: &Matrix<S>, v: &Vector<S>, meter: &mut MultMeter| {
        mat.mat_vec_metered(v, meter).expect("shard dims")
    };

    let lv = &shard.levels[0];
    let mut r = if skip_r {
        Vector::zeros(dim)
    } else {
        let r1 = mv(&lv.eval_a2, x0, meter);
        mv(&lv.eval_a1, &r1, meter)
    };
    let w1 = mv(&shard.eval_q2, y, meter); // w^(1), length N/m
    let mut w = mv(&lv.eval_a1, &w1, meter); // w^(2), length N
    let mut s = scaled_snapshot(
        &w,
        &lv.identity_scales,
        &w1,
        &shard.xi,
        top - (m as u64),
        meter,
    );

    for i in 3..=n {
        let level = i.div_ceil(2);
        let lv = &shard.levels[level - 1];
        if i % 2 == 1 {
            if !skip_r {
                r = mv(&lv.eval_a2, &r, meter);
            }
            w = mv(&lv.eval_a2, &w, meter);
        } else {
            if !skip_r {
                r = mv(&lv.eval_a1, &r, meter);
            }
            let w_new = mv(&lv.eval_a1, &w, meter);
            let exponent = top - (m as u64).pow(level as u32);
            let inc = scaled_snapshot(&w_new, &lv.identity_scales, &w, &shard.xi, exponent, meter);
            s = s.add(&inc);
            w = w_new;
        }
    }

    let value = if skip_r { s } else { r.add(&s) };
    EtaEval {
        xi: shard.xi.clone(),
        value,
    }
}

/// `xi^exponent * (w + stack(scales, w_prev))`.
fn scaled_snapshot<S: Scalar>(
    w: &Vector<S>,
    scales: &[S],
    w_prev: &Vector<S>,
    xi: &S,
    exponent: u64,
    meter: &mut MultMeter,
) -> Vector<S> {
    let stacked = apply_identity_scales_metered(scales, w_prev, meter);
    let sum = w.add(&stacked);
    if exponent == 0 {
        sum
    } else {
        let factor = pow_metered(xi, exponent, meter);
        meter.add(sum.len() as u64);
        sum.scale(&factor)
    }
}

// --- float worker path (double-double internals, f64 in and out) ---

fn worker_eta_f64<S: Scalar>(
    shard: &ShardBundle<S>,
    x0: &Vector<S>,
    y: &Vector<S>,
    m: usize,
    n: usize,
    meter: &mut MultMeter,
) -> Option<Vector<S>> {
    let shard = (shard as &dyn Any).downcast_ref::<ShardBundle<f64>>()?;
    let x0 = (x0 as &dyn Any).downcast_ref::<Vector<f64>>()?;
    let y = (y as &dyn Any).downcast_ref::<Vector<f64>>()?;

    let dim = shard.padded_dim();
    let half = n / 2;
    let top = (m as u64).pow(half as u32);
    let skip_r = x0.is_zero();

    let lift = |v: &Vector<f64>| -> Vec<Dd> { v.iter().map(|&x| Dd::from_f64(x)).collect() };
    let mv = |mat: &Matrix<f64>, v: &[Dd], meter: &mut MultMeter| -> Vec<Dd> {
        meter.add(mat.rows() as u64 * mat.cols() as u64);
        (0..mat.rows()).map(|i| dot_f64_dd(mat.row(i), v)).collect()
    };
    let stack = |scales: &[f64], v: &[Dd], meter: &mut MultMeter| -> Vec<Dd> {
        let mut out = Vec::with_capacity(scales.len() * v.len());
        for (j, &sc) in scales.iter().enumerate() {
            if j == 0 {
                out.extend_from_slice(v);
            } else {
                meter.add(v.len() as u64);
                out.extend(v.iter().map(|x| x.mul_f64(sc)));
            }
        }
        out
    };
    let snapshot =
        |w: &[Dd], scales: &[f64], w_prev: &[Dd], xi: f64, e: u64, meter: &mut MultMeter| {
            let stacked = stack(scales, w_prev, meter);
            let sum: Vec<Dd> = w.iter().zip(&stacked).map(|(a, b)| *a + *b).collect();
            if e == 0 {
                sum
            } else {
                // mirror pow_metered's multiply count
                let mut ee = e;
                while ee > 0 {
                    if ee & 1 == 1 {
                        meter.add(1);
                    }
                    ee >>= 1;
                    if ee > 0 {
                        meter.add(1);
                    }
                }
                let factor = Dd::from_f64(xi).pow_u64(e);
                meter.add(sum.len() as u64);
                sum.iter().map(|x| *x * factor).collect()
            }
        };

    let lv = &shard.levels[0];
    let mut r: Vec<Dd> = if skip_r {
        vec![Dd::ZERO; dim]
    } else {
        let r1 = mv(&lv.eval_a2, &lift(x0), meter);
        mv(&lv.eval_a1, &r1, meter)
    };
    let w1 = mv(&shard.eval_q2, &lift(y), meter);
    let mut w = mv(&lv.eval_a1, &w1, meter);
    let mut s = snapshot(
        &w,
        &lv.identity_scales,
        &w1,
        shard.xi,
        top - m as u64,
        meter,
    );

    for i in 3..=n {
        let level = i.div_ceil(2);
        let lv = &shard.levels[level - 1];
        if i % 2 == 1 {
            if !skip_r {
                r = mv(&lv.eval_a2, &r, meter);
            }
            w = mv(&lv.eval_a2, &w, meter);
        } else {
            if !skip_r {
                r = mv(&lv.eval_a1, &r, meter);
            }
            let w_new = mv(&lv.eval_a1, &w, meter);
            let e = top - (m as u64).pow(level as u32);
            let inc = snapshot(&w_new, &lv.identity_scales, &w, shard.xi, e, meter);
            s = s.iter().zip(&inc).map(|(a, b)| *a + *b).collect();
            w = w_new;
        }
    }

    let value: Vec<f64> = if skip_r {
        s.iter().map(|x| x.to_f64()).collect()
    } else {
        r.iter().zip(&s).map(|(a, b)| (*a + *b).to_f64()).collect()
    };
    let boxed: Box<dyn Any> = Box::new(Vector::from_vec(value));
    Some(*boxed.downcast::<Vector<S>>().expect("S == f64"))
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

/// Weights `c_j` with `sum_j c_j f(xi_j) = [xi^target] f` for every
/// polynomial `f` of degree below `points.len()`.
///
/// Computed in closed form from the Lagrange basis: `c_j` is the `target`
/// coefficient of `prod_{k != j} (x - xi_k)` divided by
/// `prod_{k != j} (xi_j - xi_k)`. Setup is `O(K^2)`, application `O(NK)`.
pub fn lagrange_coefficient_weights<S: Scalar>(
    points: &[S],
    target_power: usize,
) -> Result<Vec<S>, CodingError> {
    lagrange_weights_metered(points, target_power, &mut MultMeter::new())
}

fn lagrange_weights_metered<S: Scalar>(
    points: &[S],
    target_power: usize,
    meter: &mut MultMeter,
) -> Result<Vec<S>, CodingError> {
    let k = points.len();
    if k == 0 {
        return Err(CodingError::BadParams("no interpolation points".into()));
    }
    if target_power >= k {
        return Err(CodingError::BadParams(format!(
            "target power {target_power} needs more than {k} points"
        )));
    }
    for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate().skip(i + 1) {
            if p == q {
                return Err(CodingError::DuplicatePoint { i, j });
            }
        }
    }
    // master(x) = prod_k (x - xi_k), ascending coefficients
    let mut master = vec![S::one()];
    for p in points {
        let mut next = vec![S::zero(); master.len() + 1];
        for (i, c) in master.iter().enumerate() {
            next[i + 1] = next[i + 1].clone() + c.clone();
            meter.add(1);
            next[i] = next[i].clone() - p.clone() * c.clone();
        }
        master = next;
    }
    let mut weights = Vec::with_capacity(k);
    for (j, xj) in points.iter().enumerate() {
        // synthetic division: master / (x - xj), ascending quotient
        let mut quotient = vec![S::zero(); k];
        quotient[k - 1] = master[k].clone();
        for i in (0..k - 1).rev() {
            meter.add(1);
            quotient[i] = master[i + 1].clone() + xj.clone() * quotient[i + 1].clone();
        }
        let mut denom = S::one();
        for (i, xi) in points.iter().enumerate() {
            if i != j {
                meter.add(1);
                denom = denom * (xj.clone() - xi.clone());
            }
        }
        meter.add(1);
        weights.push(quotient[target_power].clone() / denom);
    }
    Ok(weights)
}

/// Recover the solver state from exactly `K` worker outputs at distinct
/// points: per-coordinate coefficient extraction at power `m^(n/2) - 1`,
/// truncated to the unpadded length.
///
/// Over the float backend the weighted sum is carried in exact rational
/// arithmetic internally (every f64 is a rational) and rounded once per
/// coordinate: the extraction weights grow like the inverse point spacing to
/// the power `K-1`, so f64 accumulation would forfeit most of the accuracy
/// the workers delivered. Inputs and outputs remain plain f64 words.
pub fn decode<S: Scalar>(
    evals: &[EtaEval<S>],
    split_factor: usize,
    iterations: usize,
    original_len: usize,
    meter: &mut MultMeter,
) -> Result<Vector<S>, CodingError> {
    let k = recovery_threshold(split_factor, iterations)?;
    if evals.len() != k {
        return Err(CodingError::WrongEvalCount {
            got: evals.len(),
            need: k,
        });
    }
    let dim = evals[0].value.len();
    if evals.iter().any(|e| e.value.len() != dim) || original_len > dim {
        return Err(CodingError::BadParams(
            "evaluation vectors disagree in length".into(),
        ));
    }
    let half = iterations / 2;
    let target = (split_factor as u64).pow(half as u32) as usize - 1;

    if S::BACKEND == Backend::Float {
        if let Some(out) = decode_f64(evals, target, original_len, meter) {
            return out;
        }
    }

    let points: Vec<S> = evals.iter().map(|e| e.xi.clone()).collect();
    let weights = lagrange_weights_metered(&points, target, meter)?;
    let mut out = Vec::with_capacity(original_len);
    for c in 0..original_len {
        let mut acc = S::zero();
        for (w, e) in weights.iter().zip(evals) {
            meter.add(1);
            acc = acc + w.clone() * e.value[c].clone();
        }
        out.push(acc);
    }
    Ok(Vector::from_vec(out))
}

fn decode_f64<S: Scalar>(
    evals: &[EtaEval<S>],
    target: usize,
    original_len: usize,
    meter: &mut MultMeter,
) -> Option<Result<Vector<S>, CodingError>> {
    let evals: Vec<&EtaEval<f64>> = evals
        .iter()
        .map(|e| (e as &dyn Any).downcast_ref::<EtaEval<f64>>())
        .collect::<Option<_>>()?;
    Some(
        decode_f64_inner(&evals, target, original_len, meter).map(|v| {
            let boxed: Box<dyn Any> = Box::new(v);
            *boxed.downcast::<Vector<S>>().expect("S == f64")
        }),
    )
}

fn decode_f64_inner(
    evals: &[&EtaEval<f64>],
    target: usize,
    original_len: usize,
    meter: &mut MultMeter,
) -> Result<Vector<f64>, CodingError> {
    let lift = |v: f64| Rational::from_f64_exact(v).map_err(CodingError::from);
    let points = evals
        .iter()
        .map(|e| lift(e.xi))
        .collect::<Result<Vec<_>, _>>()?;
    let weights = lagrange_weights_metered(&points, target, meter)?;
    let mut out = Vec::with_capacity(original_len);
    for c in 0..original_len {
        let mut acc = Rational::zero();
        for (w, e) in weights.iter().zip(evals) {
            meter.add(1);
            acc = acc + w.clone() * lift(e.value[c])?;
        }
        out.push(acc.to_f64());
    }
    Ok(Vector::from_vec(out))
}
