//! Centralized reference solver for the fixed-point recursion
//! `x_{k+1} = A x_k + Q y`, plus the Jacobi and gradient-descent casts into
//! that shape and the error-decay iteration bound.
//!
//! Everything here is the oracle the distributed protocols are checked
//! against: `iterate` is plain repeated application, `closed_form` recomputes
//! the same value through explicit matrix powers, and the two must agree
//! exactly over the exact backend.

use thiserror::Error;

use crate::linalg::{solve_linear, spectral_radius_estimate, LinalgError, Matrix, Vector};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("iteration count must be even and at least 2, got {0}")]
    OddIterations(usize),
    #[error("zero diagonal entry at row {0}")]
    ZeroDiagonal(usize),
    #[error("step size must be positive")]
    BadStepSize,
    #[error("shrinkage must lie in [0, 1)")]
    BadShrinkage,
    #[error("system has more columns than rows ({cols} > {rows})")]
    WideSystem { rows: usize, cols: usize },
    #[error("decay rate must satisfy 0 < sigma1 < 1, got {0}")]
    BadDecayRate(f64),
    #[error("target error must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("projection bound must be non-negative, got {0}")]
    BadProjectionBound(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The tuple defining the recursion: `x_{k+1} = A x_k + Q y`, run for
/// `iterations` steps from `x0`. Iteration counts are even throughout this
/// crate because the coded protocols are defined for even counts only.
#[derive(Clone, Debug)]
pub struct IterationSystem<S> {
    pub a: Matrix<S>,
    pub q: Matrix<S>,
    pub y: Vector<S>,
    pub x0: Vector<S>,
    pub iterations: usize,
}

impl<S: Scalar> IterationSystem<S> {
    pub fn new(
        a: Matrix<S>,
        q: Matrix<S>,
        y: Vector<S>,
        x0: Vector<S>,
        iterations: usize,
    ) -> Result<Self, SolverError> {
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
        if y.len() != a.rows() || x0.len() != a.rows() {
            return Err(LinalgError::Dim(format!(
                "vectors of length {} and {} for size-{} system",
                y.len(),
                x0.len(),
                a.rows()
            ))
            .into());
        }
        if iterations < 2 || iterations % 2 != 0 {
            return Err(SolverError::OddIterations(iterations));
        }
        Ok(IterationSystem {
            a,
            q,
            y,
            x0,
            iterations,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn with_iterations(&self, iterations: usize) -> Result<Self, SolverError> {
        IterationSystem::new(
            self.a.clone(),
            self.q.clone(),
            self.y.clone(),
            self.x0.clone(),
            iterations,
        )
    }
}

/// Convergence is only guaranteed when every eigenvalue of `A` has magnitude
/// below 1. Returns `Some(estimate)` when the power-iteration estimate says
/// otherwise; callers treat this as a warning, not an error, because the
/// estimate carries no guarantee.
pub fn contraction_warning(sys: &IterationSystem<f64>) -> Option<f64> {
    let rho = spectral_radius_estimate(&sys.a, 200, 0x5eed);
    (rho >= 1.0).then_some(rho)
}

/// Jacobi cast of `M x = y`: with `M = D + L` (D diagonal, L zero-diagonal),
/// the update `x <- D^{-1}(y - L x)` has `A = -D^{-1} L`, `Q = D^{-1}`.
pub fn jacobi_cast<S: Scalar>(m: &Matrix<S>) -> Result<(Matrix<S>, Matrix<S>), SolverError> {
    if !m.is_square() {
        return Err(LinalgError::Dim(format!("{}x{} matrix", m.rows(), m.cols())).into());
    }
    let n = m.rows();
    for i in 0..n {
        if m.get(i, i).is_zero() {
            return Err(SolverError::ZeroDiagonal(i));
        }
    }
    let mut a = Matrix::zeros(n, n);
    let mut q = Matrix::zeros(n, n);
    for i in 0..n {
        let d_inv = S::one() / m.get(i, i).clone();
        q.set(i, i, d_inv.clone());
        for j in 0..n {
            if i != j {
                a.set(i, j, -(d_inv.clone() * m.get(i, j).clone()));
            }
        }
    }
    Ok((a, q))
}

/// Gradient-descent cast of `min ||M x - y||^2` with step `delta` and
/// shrinkage `lambda`: `A = (1 - lambda) I - delta M^T M`, `Q = delta M^T`.
/// `Q` is `N x L`; when `L < N` it is zero-padded to square (the caller pads
/// `y` to length `N` the same way). Systems with more columns than rows are
/// rejected.
pub fn gd_cast<S: Scalar>(
    m: &Matrix<S>,
    delta: &S,
    lambda: &S,
) -> Result<(Matrix<S>, Matrix<S>), SolverError> {
    if delta.is_zero() || delta.is_negative() {
        return Err(SolverError::BadStepSize);
    }
    let one_minus = S::one() - lambda.clone();
    if lambda.is_negative() || one_minus.is_negative() || one_minus.is_zero() {
        return Err(SolverError::BadShrinkage);
    }
    let (rows, cols) = (m.rows(), m.cols());
    if cols > rows {
        return Err(SolverError::WideSystem { rows, cols });
    }
    let mt = m.transpose();
    let mtm = mt.mat_mul(m)?;
    let n = cols;
    let a = Matrix::from_fn(n, n, |i, j| {
        let shrink = if i == j {
            S::one() - lambda.clone()
        } else {
            S::zero()
        };
        shrink - delta.clone() * mtm.get(i, j).clone()
    });
    // delta * M^T, zero-padded from N x L to N x N
    let q = Matrix::from_fn(n, n, |i, j| {
        if j < rows {
            delta.clone() * mt.get(i, j).clone()
        } else {
            S::zero()
        }
    });
    Ok((a, q))
}

/// `x^(n)` by n applications of the recursion. This is the system-wide
/// correctness oracle.
pub fn iterate<S: Scalar>(sys: &IterationSystem<S>) -> Vector<S> {
    let qy = sys.q.mat_vec(&sys.y).expect("validated dims");
    let mut x = sys.x0.clone();
    for _ in 0..sys.iterations {
        x = sys.a.mat_vec(&x).expect("validated dims").add(&qy);
    }
    x
}

/// The same value through the closed form
/// `x^(n) = A^n x0 + (A^(n-1) + ... + I) Q y`, computed with explicit matrix
/// powers. Must equal [`iterate`] exactly over the exact backend.
pub fn closed_form<S: Scalar>(sys: &IterationSystem<S>) -> Vector<S> {
    let n = sys.iterations;
    let dim = sys.dim();
    let mut power = Matrix::<S>::identity(dim); // A^i
    let mut geom = Matrix::<S>::zeros(dim, dim); // I + A + ... + A^(n-1)
    for _ in 0..n {
        geom = geom.add(&power);
        power = power.mat_mul(&sys.a).expect("square");
    }
    let head = power.mat_vec(&sys.x0).expect("validated dims");
    let qy = sys.q.mat_vec(&sys.y).expect("validated dims");
    head.add(&geom.mat_vec(&qy).expect("validated dims"))
}

/// Inputs to the required-iteration bound: the error after n steps satisfies
/// `||e^(n)|| <= N * sigma1^n * max_alpha` for diagonalizable `A` with all
/// eigenvalue magnitudes at most `sigma1 < 1`, where `max_alpha` bounds the
/// eigen-projections of the initial error.
#[derive(Clone, Copy, Debug)]
pub struct ErrorBoundInputs {
    pub sigma1: f64,
    pub dim: usize,
    pub max_alpha: f64,
    pub epsilon: f64,
}

/// Smallest even iteration count guaranteeing `||e^(n)|| <= epsilon`:
/// the bound is `log(N * max_alpha / epsilon) / log(1 / sigma1)`, rounded up
/// to an even integer and floored at 2.
pub fn required_iterations(b: &ErrorBoundInputs) -> Result<(f64, usize), SolverError> {
    if b.sigma1.is_nan() || b.sigma1 <= 0.0 || b.sigma1 >= 1.0 {
        return Err(SolverError::BadDecayRate(b.sigma1));
    }
    if b.epsilon.is_nan() || b.epsilon <= 0.0 {
        return Err(SolverError::BadEpsilon(b.epsilon));
    }
    if b.max_alpha.is_nan() || b.max_alpha < 0.0 {
        return Err(SolverError::BadProjectionBound(b.max_alpha));
    }
    let ratio = b.dim as f64 * b.max_alpha / b.epsilon;
    let bound = ratio.ln() / (1.0 / b.sigma1).ln();
    let mut n = bound.max(0.0).ceil() as usize;
    if n < 2 {
        n = 2;
    }
    if n % 2 != 0 {
        n += 1;
    }
    Ok((bound, n))
}

/// Fixed point `x*` solved from `(I - A) x* = Q y`.
pub fn fixed_point<S: Scalar>(sys: &IterationSystem<S>) -> Result<Vector<S>, SolverError> {
    let i_minus_a = Matrix::identity(sys.dim()).sub(&sys.a);
    let qy = sys.q.mat_vec(&sys.y)?;
    Ok(solve_linear(&i_minus_a, &qy)?)
}

/// `||x_n - x*||_2` against the solved fixed point.
pub fn error_norm<S: Scalar>(
    sys: &IterationSystem<S>,
    x_n: &Vector<S>,
) -> Result<f64, SolverError> {
    let star = fixed_point(sys)?;
    if x_n.len() != star.len() {
        return Err(LinalgError::Dim(format!(
            "iterate of length {} for size-{} system",
            x_n.len(),
            star.len()
        ))
        .into());
    }
    Ok(x_n.sub(&star).norm_l2())
}
