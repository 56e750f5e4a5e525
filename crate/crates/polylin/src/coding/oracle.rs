//! Reference implementations used to verify the coding layer.
//!
//! Three independent routes compute the same object:
//!
//! * [`crate::coding::worker_eta`] — the production recursion over shard
//!   evaluations (Horner, sparse identity application);
//! * [`eta_direct`] — dense, non-recursive evaluation of the closed-form
//!   polynomial, with every split polynomial materialized by naive
//!   summation;
//! * [`symbolic_eta`] — full coefficient-list polynomial arithmetic over
//!   vector/matrix coefficients, from which both the degree and the target
//!   coefficient can be read off exactly.
//!
//! None of these share evaluation code with the production path, which is
//! what makes them useful as oracles. They are exported (rather than living
//! under `#[cfg(test)]`) so integration suites can drive them; they are not
//! tuned for speed and [`symbolic_eta`] enforces a hard size cap.

use crate::linalg::{split_horizontal, split_vertical, Matrix, Vector};
use crate::scalar::Scalar;

use super::{recovery_threshold, CodingError, EtaEval};

/// Cap on `m^(n/2)` for the symbolic oracle (degree `2 m^(n/2) - 2`).
pub const SYMBOLIC_CAP: u64 = 32;

// ---------------------------------------------------------------------------
// Polynomials with matrix / vector coefficients
// ---------------------------------------------------------------------------

/// Polynomial with matrix coefficients, ascending powers. Trailing zero
/// coefficients are kept as written; only [`VecPoly`] normalizes.
#[derive(Clone, Debug, PartialEq)]
pub struct MatPoly<S> {
    pub coeffs: Vec<Matrix<S>>,
}

impl<S: Scalar> MatPoly<S> {
    pub fn constant(m: Matrix<S>) -> Self {
        MatPoly { coeffs: vec![m] }
    }

    fn rows(&self) -> usize {
        self.coeffs[0].rows()
    }

    fn cols(&self) -> usize {
        self.coeffs[0].cols()
    }

    /// Substitute `x -> x^s`: coefficient at index `i` moves to `i * s`.
    pub fn stretch(&self, s: usize) -> MatPoly<S> {
        assert!(s >= 1);
        let mut coeffs =
            vec![Matrix::zeros(self.rows(), self.cols()); (self.coeffs.len() - 1) * s + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[i * s] = c.clone();
        }
        MatPoly { coeffs }
    }

    pub fn mul(&self, rhs: &MatPoly<S>) -> MatPoly<S> {
        let rows = self.rows();
        let cols = rhs.cols();
        let mut coeffs = vec![Matrix::zeros(rows, cols); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let prod = a.mat_mul(b).expect("oracle dims");
                coeffs[i + j] = coeffs[i + j].add(&prod);
            }
        }
        MatPoly { coeffs }
    }

    pub fn add(&self, rhs: &MatPoly<S>) -> MatPoly<S> {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let zero = Matrix::zeros(self.rows(), self.cols());
        let mut coeffs = Vec::with_capacity(len);
        for i in 0..len {
            let a = self.coeffs.get(i).unwrap_or(&zero);
            let b = rhs.coeffs.get(i).unwrap_or(&zero);
            coeffs.push(a.add(b));
        }
        MatPoly { coeffs }
    }

    pub fn apply(&self, v: &Vector<S>) -> VecPoly<S> {
        VecPoly::normalized(
            self.coeffs
                .iter()
                .map(|c| c.mat_vec(v).expect("oracle dims"))
                .collect(),
        )
    }

    /// Coefficient at `power`, zero matrix if beyond the stored degree.
    pub fn coefficient(&self, power: usize) -> Matrix<S> {
        self.coeffs
            .get(power)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(self.rows(), self.cols()))
    }

    /// Largest index with a nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }
}

/// Polynomial with vector coefficients, ascending powers, normalized so the
/// trailing stored coefficient is nonzero (the zero polynomial keeps one
/// zero coefficient).
#[derive(Clone, Debug, PartialEq)]
pub struct VecPoly<S> {
    coeffs: Vec<Vector<S>>,
}

impl<S: Scalar> VecPoly<S> {
    pub fn normalized(mut coeffs: Vec<Vector<S>>) -> Self {
        while coeffs.len() > 1 && coeffs.last().map(Vector::is_zero) == Some(true) {
            coeffs.pop();
        }
        assert!(!coeffs.is_empty());
        VecPoly { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn coefficient(&self, power: usize) -> Vector<S> {
        self.coeffs
            .get(power)
            .cloned()
            .unwrap_or_else(|| Vector::zeros(self.dim()))
    }

    pub fn coefficients(&self) -> &[Vector<S>] {
        &self.coeffs
    }

    pub fn add(&self, rhs: &VecPoly<S>) -> VecPoly<S> {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let zero = Vector::zeros(self.dim());
        let mut coeffs = Vec::with_capacity(len);
        for i in 0..len {
            let a = self.coeffs.get(i).unwrap_or(&zero);
            let b = rhs.coeffs.get(i).unwrap_or(&zero);
            coeffs.push(a.add(b));
        }
        VecPoly::normalized(coeffs)
    }

    /// Multiply by `x^shift`.
    pub fn shifted(&self, shift: usize) -> VecPoly<S> {
        let mut coeffs = vec![Vector::zeros(self.dim()); shift];
        coeffs.extend(self.coeffs.iter().cloned());
        VecPoly::normalized(coeffs)
    }

    pub fn eval(&self, xi: &S) -> Vector<S> {
        let mut acc = self.coeffs.last().expect("nonempty").clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc.scale(xi).add(c);
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Split polynomials as coefficient lists
// ---------------------------------------------------------------------------

/// `a1(x) = sum_j A1j x^j` from the column blocks of `a`.
pub fn a1_poly<S: Scalar>(a: &Matrix<S>, m: usize) -> MatPoly<S> {
    MatPoly {
        coeffs: split_vertical(a, m).expect("padded input").blocks,
    }
}

/// `a2(x) = sum_j A2j x^(m-1-j)` from the row blocks of `a`.
pub fn a2_poly<S: Scalar>(a: &Matrix<S>, m: usize) -> MatPoly<S> {
    let mut blocks = split_horizontal(a, m).expect("padded input").blocks;
    blocks.reverse();
    MatPoly { coeffs: blocks }
}

/// `q2(x) = sum_j Q2j x^(m-1-j)` from the row blocks of `q`.
pub fn q2_poly<S: Scalar>(q: &Matrix<S>, m: usize) -> MatPoly<S> {
    let mut blocks = split_horizontal(q, m).expect("padded input").blocks;
    blocks.reverse();
    MatPoly { coeffs: blocks }
}

/// The identity-block polynomial in its dense acting form: coefficient `j`
/// is the `N x N/m` matrix embedding a block into rows `j*N/m ..`. Applying
/// the evaluation at a point to a vector equals the sparse block-scaled
/// stacking of [`crate::coding::apply_identity_scales`].
pub fn identity_stack_poly<S: Scalar>(dim: usize, m: usize) -> MatPoly<S> {
    assert!(dim % m == 0, "padded input");
    let band = dim / m;
    let coeffs = (0..m)
        .map(|j| {
            Matrix::from_fn(dim, band, |r, c| {
                if r == j * band + c {
                    S::one()
                } else {
                    S::zero()
                }
            })
        })
        .collect();
    MatPoly { coeffs }
}

/// Dense matrix of the identity-block evaluation given its scale factors.
pub fn identity_scaling_dense<S: Scalar>(scales: &[S], band: usize) -> Matrix<S> {
    Matrix::from_fn(scales.len() * band, band, |r, c| {
        if r % band == c {
            scales[r / band].clone()
        } else {
            S::zero()
        }
    })
}

/// `a1(x) a2(x)`: carries `A^2` as the coefficient of `x^(m-1)`.
pub fn pc_poly<S: Scalar>(a: &Matrix<S>, m: usize) -> MatPoly<S> {
    a1_poly(a, m).mul(&a2_poly(a, m))
}

/// `a1(x) q2(x)`: carries `AQ` as the coefficient of `x^(m-1)`.
pub fn pd_poly<S: Scalar>(a: &Matrix<S>, q: &Matrix<S>, m: usize) -> MatPoly<S> {
    a1_poly(a, m).mul(&q2_poly(q, m))
}

/// The telescoped product carrying `A^(l-1) Q` as the coefficient of
/// `x^(m^(ceil(l/2)) - 1)`, defined for `l >= 2`:
///
/// * `l = 2`: `pd(x)` itself;
/// * even `l`: `pc(x^(m^(l/2-1))) * ... * pc(x^m) * pd(x)`;
/// * odd `l`: `id(x^(m^((l-1)/2))) * a2(x^(m^((l-1)/2)))` applied on top of
///   the even product below it.
///
/// The odd case matches what the worker recursion accumulates: the identity
/// stack and an `a2` evaluation at the same tower level, wrapped around the
/// even product two levels down. Both the even and odd polynomial at a given
/// tower level have degree `2 m^(ceil(l/2)) - 2`.
pub fn telescope_poly<S: Scalar>(l: usize, a: &Matrix<S>, q: &Matrix<S>, m: usize) -> MatPoly<S> {
    assert!(l >= 2, "telescope defined for l >= 2");
    let pd = pd_poly(a, q, m);
    if l == 2 {
        return pd;
    }
    if l % 2 == 0 {
        let pc = pc_poly(a, m);
        let mut acc = pd;
        for i in 2..=l / 2 {
            acc = pc.stretch(m.pow(i as u32 - 1)).mul(&acc);
        }
        acc
    } else {
        let s = m.pow(((l - 1) / 2) as u32);
        let inner = telescope_poly(l - 1, a, q, m);
        identity_stack_poly(a.rows(), m)
            .stretch(s)
            .mul(&a2_poly(a, m).stretch(s))
            .mul(&inner)
    }
}

// ---------------------------------------------------------------------------
// Direct and symbolic eta
// ---------------------------------------------------------------------------

/// Evaluate a matrix polynomial at a point by naive term-by-term summation
/// (deliberately not Horner, to stay independent of the production path).
fn eval_naive<S: Scalar>(p: &MatPoly<S>, xi: &S) -> Matrix<S> {
    let mut acc = Matrix::zeros(p.rows(), p.cols());
    let mut power = S::one();
    for (i, c) in p.coeffs.iter().enumerate() {
        if i > 0 {
            power = power * xi.clone();
        }
        if !c.is_zero() {
            acc = acc.add(&c.scale(&power));
        }
    }
    acc
}

fn checked_tower<S: Scalar>(xi: &S, m: usize, half: usize) -> Vec<S> {
    let mut towers = Vec::with_capacity(half);
    let mut t = xi.clone();
    for level in 0..half {
        if level > 0 {
            t = t.pow_u64(m as u64);
        }
        towers.push(t.clone());
    }
    towers
}

/// Direct (non-recursive) evaluation of the coded polynomial at one point:
/// the product chain applied to `x0` plus, for each pair level `k`, the
/// shifted pair of telescoped products applied to `y`. Every factor is
/// materialized densely, including the identity stack.
pub fn eta_direct<S: Scalar>(
    a: &Matrix<S>,
    q: &Matrix<S>,
    x0: &Vector<S>,
    y: &Vector<S>,
    split_factor: usize,
    iterations: usize,
    xi: &S,
) -> Result<EtaEval<S>, CodingError> {
    let m = split_factor;
    let n = iterations;
    recovery_threshold(m, n)?; // validates m, n
    let half = n / 2;
    let top = (m as u64).pow(half as u32);
    let towers = checked_tower(xi, m, half);

    let pc = pc_poly(a, m);
    let pd = pd_poly(a, q, m);
    let q2 = q2_poly(q, m);
    let a2 = a2_poly(a, m);
    let id = identity_stack_poly(a.rows(), m);

    // product chain on x0, highest tower level leftmost
    let mut value = x0.clone();
    for t in &towers {
        value = eval_naive(&pc, t).mat_vec(&value)?;
    }

    for k in 1..=half {
        let term = if k == 1 {
            let direct = eval_naive(&pd, xi).mat_vec(y)?;
            let stacked = eval_naive(&id, xi)
                .mat_mul(&eval_naive(&q2, xi))?
                .mat_vec(y)?;
            direct.add(&stacked)
        } else {
            // even product: pc(tower_k) ... pc(tower_2) pd(xi) y
            let mut even = eval_naive(&pd, xi).mat_vec(y)?;
            for t in &towers[1..k] {
                even = eval_naive(&pc, t).mat_vec(&even)?;
            }
            // odd product: id(tower_k) a2(tower_k) pc(tower_{k-1}) ... pd(xi) y
            let mut odd = eval_naive(&pd, xi).mat_vec(y)?;
            for t in &towers[1..k - 1] {
                odd = eval_naive(&pc, t).mat_vec(&odd)?;
            }
            let t_k = &towers[k - 1];
            odd = eval_naive(&a2, t_k).mat_vec(&odd)?;
            odd = eval_naive(&id, t_k).mat_vec(&odd)?;
            even.add(&odd)
        };
        let exponent = top - (m as u64).pow(k as u32);
        let scaled = if exponent == 0 {
            term
        } else {
            term.scale(&xi.pow_u64(exponent))
        };
        value = value.add(&scaled);
    }
    Ok(EtaEval {
        xi: xi.clone(),
        value,
    })
}

/// The full coded polynomial as a coefficient list. Its degree is
/// `2 m^(n/2) - 2` for generic inputs (special inputs can cancel leading
/// coefficients) and its coefficient at `x^(m^(n/2) - 1)` is exactly the
/// n-step solver state. Enforces `m^(n/2) <= 32`.
pub fn symbolic_eta<S: Scalar>(
    a: &Matrix<S>,
    q: &Matrix<S>,
    x0: &Vector<S>,
    y: &Vector<S>,
    split_factor: usize,
    iterations: usize,
) -> Result<VecPoly<S>, CodingError> {
    let m = split_factor;
    let n = iterations;
    recovery_threshold(m, n)?;
    let half = n / 2;
    let tower_top = (m as u64)
        .checked_pow(half as u32)
        .ok_or(CodingError::CapExceeded {
            value: u64::MAX,
            cap: SYMBOLIC_CAP,
        })?;
    if tower_top > SYMBOLIC_CAP {
        return Err(CodingError::CapExceeded {
            value: tower_top,
            cap: SYMBOLIC_CAP,
        });
    }
    let top = tower_top as usize;

    let pc = pc_poly(a, m);
    let pd = pd_poly(a, q, m);
    let q2 = q2_poly(q, m);
    let id = identity_stack_poly(a.rows(), m);

    // product chain on x0
    let mut chain = MatPoly::constant(Matrix::identity(a.rows()));
    for level in 1..=half {
        chain = pc.stretch(m.pow(level as u32 - 1)).mul(&chain);
    }
    let mut eta = chain.apply(x0);

    for k in 1..=half {
        let pair = if k == 1 {
            pd.add(&id.mul(&q2))
        } else {
            telescope_poly(2 * k, a, q, m).add(&telescope_poly(2 * k - 1, a, q, m))
        };
        let shift = top - m.pow(k as u32);
        eta = eta.add(&pair.apply(y).shifted(shift));
    }
    Ok(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{make_shard, worker_eta, CodingParams};
    use crate::linalg::MultMeter;
    use crate::scalar::Rational;
    use crate::solver::{iterate, IterationSystem};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rat(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn random_system(
        rng: &mut ChaCha8Rng,
        dim: usize,
        iterations: usize,
        positive: bool,
    ) -> IterationSystem<Rational> {
        let entry = |rng: &mut ChaCha8Rng| {
            let num = if positive {
                rng.random_range(1..=5)
            } else {
                rng.random_range(-5..=5)
            };
            rat(num, rng.random_range(1..=3))
        };
        let a = Matrix::from_fn(dim, dim, |_, _| entry(rng));
        let q = Matrix::from_fn(dim, dim, |_, _| entry(rng));
        let y = Vector::from_vec((0..dim).map(|_| entry(rng)).collect());
        let x0 = Vector::from_vec((0..dim).map(|_| entry(rng)).collect());
        IterationSystem::new(a, q, y, x0, iterations).unwrap()
    }

    #[test]
    fn pc_carries_a_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sys = random_system(&mut rng, 4, 2, false);
        let pc = pc_poly(&sys.a, 2);
        assert_eq!(pc.coefficient(1), sys.a.mat_mul(&sys.a).unwrap());
        let pd = pd_poly(&sys.a, &sys.q, 2);
        assert_eq!(pd.coefficient(1), sys.a.mat_mul(&sys.q).unwrap());
    }

    #[test]
    fn direct_matches_recursion_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for &(m, n) in &[(2usize, 2usize), (3, 2), (2, 4), (2, 6)] {
            let dim = m * 2;
            let sys = random_system(&mut rng, dim, n, false);
            let k = crate::coding::recovery_threshold(m, n).unwrap();
            let params = CodingParams::<Rational>::with_default_points(m, n, k).unwrap();
            for w in [0, k - 1] {
                let shard = make_shard(&sys.a, &sys.q, &params, w).unwrap();
                let rec = worker_eta(&shard, &sys.x0, &sys.y, m, n, &mut MultMeter::new());
                let dir = eta_direct(
                    &sys.a,
                    &sys.q,
                    &sys.x0,
                    &sys.y,
                    m,
                    n,
                    &params.eval_points[w],
                )
                .unwrap();
                assert_eq!(rec, dir, "m={m} n={n} worker={w}");
            }
        }
    }

    #[test]
    fn symbolic_degree_and_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for &(m, n) in &[(2usize, 2usize), (3, 2), (2, 4), (2, 6)] {
            let dim = m * 2;
            // positive entries keep every leading product nonzero, so the
            // generic degree is attained
            let sys = random_system(&mut rng, dim, n, true);
            let eta = symbolic_eta(&sys.a, &sys.q, &sys.x0, &sys.y, m, n).unwrap();
            let top = m.pow((n / 2) as u32);
            assert_eq!(eta.degree(), 2 * top - 2, "degree m={m} n={n}");
            assert_eq!(
                eta.coefficient(top - 1),
                iterate(&sys),
                "coefficient m={m} n={n}"
            );
        }
    }

    #[test]
    fn symbolic_eval_matches_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let (m, n) = (2usize, 4usize);
        let sys = random_system(&mut rng, 4, n, false);
        let eta = symbolic_eta(&sys.a, &sys.q, &sys.x0, &sys.y, m, n).unwrap();
        let params = CodingParams::<Rational>::with_default_points(m, n, 7).unwrap();
        for w in 0..3 {
            let shard = make_shard(&sys.a, &sys.q, &params, w).unwrap();
            let rec = worker_eta(&shard, &sys.x0, &sys.y, m, n, &mut MultMeter::new());
            assert_eq!(eta.eval(&params.eval_points[w]), rec.value);
        }
    }

    #[test]
    fn symbolic_cap_enforced() {
        let a = Matrix::<Rational>::identity(2);
        let v = Vector::zeros(2);
        let err = symbolic_eta(&a, &a, &v, &v, 2, 12);
        assert!(matches!(err, Err(CodingError::CapExceeded { .. })));
    }

    #[test]
    fn telescope_even_coefficient_is_matrix_power_times_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let m = 2usize;
        for l in [4usize, 6] {
            let sys = random_system(&mut rng, 4, 2, false);
            let p = telescope_poly(l, &sys.a, &sys.q, m);
            let coeff = p.coefficient(m.pow((l / 2) as u32) - 1);
            let expect = sys.a.pow(l - 1).unwrap().mat_mul(&sys.q).unwrap();
            assert_eq!(coeff, expect, "l={l}");
        }
    }

    #[test]
    fn telescope_paired_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let m = 2usize;
        for l in [4usize, 6] {
            let sys = random_system(&mut rng, 4, 2, false);
            let pair =
                telescope_poly(l, &sys.a, &sys.q, m).add(&telescope_poly(l - 1, &sys.a, &sys.q, m));
            let coeff = pair.coefficient(m.pow((l / 2) as u32) - 1);
            let expect = sys
                .a
                .pow(l - 1)
                .unwrap()
                .mat_mul(&sys.q)
                .unwrap()
                .add(&sys.a.pow(l - 2).unwrap().mat_mul(&sys.q).unwrap());
            assert_eq!(coeff, expect, "l={l}");
        }
    }

    #[test]
    fn telescope_pair_degree_identity() {
        // shifted pair degree: m^(n/2) + m^(t/2) - 2 for (n, t) = (6, 4)
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let m = 2usize;
        let (n, t) = (6usize, 4usize);
        let sys = random_system(&mut rng, 4, 2, true);
        let pair =
            telescope_poly(t, &sys.a, &sys.q, m).add(&telescope_poly(t - 1, &sys.a, &sys.q, m));
        let shift = m.pow((n / 2) as u32) - m.pow((t / 2) as u32);
        assert_eq!(
            pair.degree() + shift,
            m.pow((n / 2) as u32) + m.pow((t / 2) as u32) - 2
        );
    }
}
