//! Dense matrices and vectors over a pluggable scalar field, plus the
//! block-splitting primitives the encoders are built from.
//!
//! Storage is row-major and dense throughout; problem sizes here are desk
//! scale. The one sparsity concession (the identity-polynomial evaluations)
//! lives in the coding layer, not here.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::{Scalar, ScalarError};

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("split factor {m} does not divide {extent} along {axis} (zero-pad first)")]
    SplitIndivisible {
        m: usize,
        extent: usize,
        axis: SplitAxis,
    },
    #[error("matrix is singular")]
    Singular,
    #[error("text format error at line {line}: {msg}")]
    Text { line: usize, msg: String },
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Counts scalar multiplications charged to a simulated node. Injected
/// per-worker so concurrent workers never share mutable state.
#[derive(Debug, Default, Clone, Copy)]
pub struct MultMeter {
    pub mults: u64,
}

impl MultMeter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, n: u64) {
        self.mults += n;
    }
}

// ---------------------------------------------------------------------------
// Vector
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq)]
pub struct Vector<S> {
    data: Vec<S>,
}

impl<S: Scalar> Vector<S> {
    pub fn from_vec(data: Vec<S>) -> Self {
        Vector { data }
    }

    pub fn zeros(len: usize) -> Self {
        Vector {
            data: vec![S::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, S> {
        self.data.iter()
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn add(&self, rhs: &Vector<S>) -> Vector<S> {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        Vector {
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &Vector<S>) -> Vector<S> {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        Vector {
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }

    pub fn scale(&self, s: &S) -> Vector<S> {
        Vector {
            data: self.data.iter().map(|x| x.clone() * s.clone()).collect(),
        }
    }

    /// Zero-extend to `len` entries.
    pub fn padded(&self, len: usize) -> Vector<S> {
        assert!(len >= self.len());
        let mut data = self.data.clone();
        data.resize(len, S::zero());
        Vector { data }
    }

    pub fn truncated(&self, len: usize) -> Vector<S> {
        assert!(len <= self.len());
        Vector {
            data: self.data[..len].to_vec(),
        }
    }

    /// Euclidean norm, reported as binary64 (irrational for exact scalars).
    pub fn norm_l2(&self) -> f64 {
        let sq = self
            .data
            .iter()
            .fold(S::zero(), |acc, x| acc + x.clone() * x.clone());
        sq.to_f64().sqrt()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|x| x.to_f64()).collect()
    }
}

impl<S: Scalar> std::ops::Index<usize> for Vector<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        &self.data[i]
    }
}

impl<S: fmt::Debug> fmt::Debug for Vector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.iter()).finish()
    }
}

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Dim(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, S::one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn transpose(&self) -> Matrix<S> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn add(&self, rhs: &Matrix<S>) -> Matrix<S> {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &Matrix<S>) -> Matrix<S> {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }

    pub fn scale(&self, s: &S) -> Matrix<S> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.clone() * s.clone()).collect(),
        }
    }

    pub fn neg(&self) -> Matrix<S> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| -x.clone()).collect(),
        }
    }

    pub fn mat_vec(&self, x: &Vector<S>) -> Result<Vector<S>, LinalgError> {
        if self.cols != x.len() {
            return Err(LinalgError::Dim(format!(
                "{}x{} matrix applied to length-{} vector",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            out.push(dot(self.row(i), x.as_slice()));
        }
        Ok(Vector::from_vec(out))
    }

    /// Same product, charging `rows * cols` scalar multiplies to `meter`.
    pub fn mat_vec_metered(
        &self,
        x: &Vector<S>,
        meter: &mut MultMeter,
    ) -> Result<Vector<S>, LinalgError> {
        meter.add(self.rows as u64 * self.cols as u64);
        self.mat_vec(x)
    }

    pub fn mat_mul(&self, rhs: &Matrix<S>) -> Result<Matrix<S>, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::Dim(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out: Matrix<S> = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k).clone();
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.get(i, j).clone() + a.clone() * rhs.get(k, j).clone();
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// `self^e` by repeated squaring; requires a square matrix.
    pub fn pow(&self, e: usize) -> Result<Matrix<S>, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::Dim("matrix power of non-square matrix".into()));
        }
        let mut acc = Matrix::identity(self.rows);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mat_mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mat_mul(&base)?;
            }
        }
        Ok(acc)
    }

    pub fn map_to_f64(&self) -> Matrix<f64> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.to_f64()).collect(),
        }
    }
}

impl<S: fmt::Debug> fmt::Debug for Matrix<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:?} ", self.data[i * self.cols + j])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

fn dot<S: Scalar>(xs: &[S], ys: &[S]) -> S {
    let mut acc = S::zero();
    for (a, b) in xs.iter().zip(ys.iter()) {
        acc = acc + a.clone() * b.clone();
    }
    acc
}

// ---------------------------------------------------------------------------
// Block splits
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitAxis {
    /// Row bands: block j holds rows `j*rows/m .. (j+1)*rows/m`.
    Horizontal,
    /// Column bands: block j holds cols `j*cols/m .. (j+1)*cols/m`.
    Vertical,
}

impl fmt::Display for SplitAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitAxis::Horizontal => write!(f, "rows"),
            SplitAxis::Vertical => write!(f, "cols"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockSplit<S> {
    pub m: usize,
    pub axis: SplitAxis,
    pub blocks: Vec<Matrix<S>>,
}

impl<S: Scalar> BlockSplit<S> {
    /// Reassemble the source matrix; inverse of the split constructors.
    pub fn unsplit(&self) -> Matrix<S> {
        match self.axis {
            SplitAxis::Horizontal => {
                let cols = self.blocks[0].cols();
                let band = self.blocks[0].rows();
                Matrix::from_fn(band * self.m, cols, |i, j| {
                    self.blocks[i / band].get(i % band, j).clone()
                })
            }
            SplitAxis::Vertical => {
                let rows = self.blocks[0].rows();
                let band = self.blocks[0].cols();
                Matrix::from_fn(rows, band * self.m, |i, j| {
                    self.blocks[j / band].get(i, j % band).clone()
                })
            }
        }
    }
}

pub fn split_horizontal<S: Scalar>(
    m: &Matrix<S>,
    parts: usize,
) -> Result<BlockSplit<S>, LinalgError> {
    if parts == 0 || m.rows() % parts != 0 {
        return Err(LinalgError::SplitIndivisible {
            m: parts,
            extent: m.rows(),
            axis: SplitAxis::Horizontal,
        });
    }
    let band = m.rows() / parts;
    let blocks = (0..parts)
        .map(|b| Matrix::from_fn(band, m.cols(), |i, j| m.get(b * band + i, j).clone()))
        .collect();
    Ok(BlockSplit {
        m: parts,
        axis: SplitAxis::Horizontal,
        blocks,
    })
}

pub fn split_vertical<S: Scalar>(
    m: &Matrix<S>,
    parts: usize,
) -> Result<BlockSplit<S>, LinalgError> {
    if parts == 0 || m.cols() % parts != 0 {
        return Err(LinalgError::SplitIndivisible {
            m: parts,
            extent: m.cols(),
            axis: SplitAxis::Vertical,
        });
    }
    let band = m.cols() / parts;
    let blocks = (0..parts)
        .map(|b| Matrix::from_fn(m.rows(), band, |i, j| m.get(i, b * band + j).clone()))
        .collect();
    Ok(BlockSplit {
        m: parts,
        axis: SplitAxis::Vertical,
        blocks,
    })
}

// ---------------------------------------------------------------------------
// Zero padding
// ---------------------------------------------------------------------------

/// A square system extended with zeros so the split factor divides its size.
/// The first `original_n` coordinates of the padded iteration equal the
/// unpadded iteration at every step: padded rows/columns stay identically
/// zero because both the new matrix entries and the new vector entries are
/// zero.
#[derive(Clone, Debug)]
pub struct PaddedSystem<S> {
    pub a: Matrix<S>,
    pub q: Matrix<S>,
    pub x0: Vector<S>,
    pub y: Vector<S>,
    pub original_n: usize,
}

pub fn zero_pad<S: Scalar>(
    a: &Matrix<S>,
    q: &Matrix<S>,
    x0: &Vector<S>,
    y: &Vector<S>,
    m: usize,
) -> Result<PaddedSystem<S>, LinalgError> {
    if !a.is_square() || !q.is_square() || a.rows() != q.rows() {
        return Err(LinalgError::Dim(format!(
            "expected equal square matrices, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            q.rows(),
            q.cols()
        )));
    }
    let n = a.rows();
    if x0.len() != n || y.len() != n {
        return Err(LinalgError::Dim(format!(
            "vectors of length {} and {} for size-{n} system",
            x0.len(),
            y.len()
        )));
    }
    assert!(m >= 1, "split factor must be at least 1");
    let padded = n.div_ceil(m) * m;
    let grow = |src: &Matrix<S>| {
        Matrix::from_fn(padded, padded, |i, j| {
            if i < n && j < n {
                src.get(i, j).clone()
            } else {
                S::zero()
            }
        })
    };
    Ok(PaddedSystem {
        a: grow(a),
        q: grow(q),
        x0: x0.padded(padded),
        y: y.padded(padded),
        original_n: n,
    })
}

// ---------------------------------------------------------------------------
// Spectral radius estimate (binary64 only)
// ---------------------------------------------------------------------------

/// Power-iteration estimate of the spectral radius from a seeded random
/// start vector. This is a heuristic: it can under-estimate when the
/// dominant eigenvalue is complex or the start vector is unlucky, so it is
/// used only for convergence warnings and for the error-bound inputs.
pub fn spectral_radius_estimate(a: &Matrix<f64>, iters: usize, seed: u64) -> f64 {
    assert!(a.is_square(), "spectral radius of non-square matrix");
    let n = a.rows();
    if n == 0 || a.is_zero() {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        let next: Vec<f64> = (0..n)
            .map(|i| a.row(i).iter().zip(&v).map(|(x, y)| x * y).sum())
            .collect();
        let nn = norm(&next);
        if nn == 0.0 {
            return 0.0;
        }
        lambda = nn / norm(&v).max(f64::MIN_POSITIVE);
        v = next.iter().map(|x| x / nn).collect();
    }
    lambda
}

// ---------------------------------------------------------------------------
// Linear solve (Gaussian elimination with partial pivoting)
// ---------------------------------------------------------------------------

pub fn solve_linear<S: Scalar>(a: &Matrix<S>, b: &Vector<S>) -> Result<Vector<S>, LinalgError> {
    if !a.is_square() || a.rows() != b.len() {
        return Err(LinalgError::Dim(format!(
            "solve with {}x{} matrix and length-{} rhs",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut rhs: Vec<S> = b.as_slice().to_vec();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if m.get(row, col).abs_cmp(m.get(pivot, col)) == std::cmp::Ordering::Greater {
                pivot = row;
            }
        }
        if m.get(pivot, col).is_zero() {
            return Err(LinalgError::Singular);
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m.get(col, j).clone();
                m.set(col, j, m.get(pivot, j).clone());
                m.set(pivot, j, tmp);
            }
            rhs.swap(col, pivot);
        }
        let inv = S::one() / m.get(col, col).clone();
        for row in col + 1..n {
            let factor = m.get(row, col).clone() * inv.clone();
            if factor.is_zero() {
                continue;
            }
            for j in col..n {
                let v = m.get(row, j).clone() - factor.clone() * m.get(col, j).clone();
                m.set(row, j, v);
            }
            rhs[row] = rhs[row].clone() - factor * rhs[col].clone();
        }
    }
    let mut x = vec![S::zero(); n];
    for col in (0..n).rev() {
        let mut acc = rhs[col].clone();
        for (j, xj) in x.iter().enumerate().skip(col + 1) {
            acc = acc - m.get(col, j).clone() * xj.clone();
        }
        x[col] = acc / m.get(col, col).clone();
    }
    Ok(Vector::from_vec(x))
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

/// First line `rows cols`, then `rows` lines of `cols` whitespace-separated
/// values: decimals for the float backend, `p/q` (or integers) for the exact
/// backend. Vectors are stored as single-column matrices.
pub fn format_matrix_text<S: Scalar>(m: &Matrix<S>) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix_text<S: Scalar>(text: &str) -> Result<Matrix<S>, LinalgError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (line_no, header) = lines.next().ok_or(LinalgError::Text {
        line: 1,
        msg: "empty input".into(),
    })?;
    let mut dims = header.split_whitespace();
    let parse_dim = |tok: Option<&str>| -> Result<usize, LinalgError> {
        tok.and_then(|t| t.parse().ok()).ok_or(LinalgError::Text {
            line: line_no + 1,
            msg: format!("expected `rows cols` header, got {header:?}"),
        })
    };
    let rows = parse_dim(dims.next())?;
    let cols = parse_dim(dims.next())?;
    let mut data = Vec::with_capacity(rows * cols);
    for (line_no, line) in lines {
        for tok in line.split_whitespace() {
            data.push(S::parse_text(tok).map_err(|e| LinalgError::Text {
                line: line_no + 1,
                msg: e.to_string(),
            })?);
        }
    }
    if data.len() != rows * cols {
        return Err(LinalgError::Text {
            line: 0,
            msg: format!("expected {} values, found {}", rows * cols, data.len()),
        });
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn write_matrix_file<S: Scalar>(path: &Path, m: &Matrix<S>) -> Result<(), LinalgError> {
    Ok(std::fs::write(path, format_matrix_text(m))?)
}

pub fn read_matrix_file<S: Scalar>(path: &Path) -> Result<Matrix<S>, LinalgError> {
    parse_matrix_text(&std::fs::read_to_string(path)?)
}

pub fn vector_as_matrix<S: Scalar>(v: &Vector<S>) -> Matrix<S> {
    Matrix::from_fn(v.len(), 1, |i, _| v[i].clone())
}

pub fn matrix_as_vector<S: Scalar>(m: &Matrix<S>) -> Result<Vector<S>, LinalgError> {
    if m.cols() != 1 {
        return Err(LinalgError::Dim(format!(
            "expected a single-column matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(Vector::from_vec(m.data().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn rat(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn mat_vec_identity_and_zero() {
        let x = Vector::from_vec(vec![3.0, 4.0]);
        assert_eq!(Matrix::<f64>::identity(2).mat_vec(&x).unwrap(), x);
        assert_eq!(
            Matrix::<f64>::zeros(2, 2).mat_vec(&x).unwrap(),
            Vector::zeros(2)
        );
    }

    #[test]
    fn mat_vec_hand_expansion() {
        let a = Matrix::from_vec(2, 2, vec![2.0, 1.0, 1.0, 3.0]).unwrap();
        let x = Vector::from_vec(vec![1.0, 1.0]);
        assert_eq!(a.mat_vec(&x).unwrap(), Vector::from_vec(vec![3.0, 4.0]));
    }

    #[test]
    fn mat_vec_dimension_mismatch() {
        let a = Matrix::<f64>::zeros(2, 3);
        assert!(a.mat_vec(&Vector::zeros(2)).is_err());
    }

    #[test]
    fn mat_vec_meters_row_times_col() {
        let a = Matrix::<f64>::zeros(3, 5);
        let mut meter = MultMeter::new();
        a.mat_vec_metered(&Vector::zeros(5), &mut meter).unwrap();
        assert_eq!(meter.mults, 15);
    }

    #[test]
    fn split_identity_rows() {
        let i4 = Matrix::<f64>::identity(4);
        let s = split_horizontal(&i4, 2).unwrap();
        assert_eq!(s.blocks.len(), 2);
        assert_eq!(*s.blocks[0].get(0, 0), 1.0);
        assert_eq!(*s.blocks[1].get(0, 2), 1.0);
        assert_eq!(s.unsplit(), i4);
    }

    #[test]
    fn split_single_block_is_source() {
        let m = Matrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(split_horizontal(&m, 1).unwrap().blocks[0], m);
        assert_eq!(split_vertical(&m, 1).unwrap().blocks[0], m);
    }

    #[test]
    fn split_rejects_indivisible() {
        let m = Matrix::<f64>::zeros(5, 5);
        assert!(matches!(
            split_horizontal(&m, 2),
            Err(LinalgError::SplitIndivisible { .. })
        ));
    }

    #[test]
    fn split_round_trip_exact() {
        let m = Matrix::from_fn(6, 6, |i, j| rat((i * 7 + j) as i64 - 17, 3));
        assert_eq!(split_horizontal(&m, 3).unwrap().unsplit(), m);
        assert_eq!(split_vertical(&m, 3).unwrap().unsplit(), m);
        assert_eq!(split_vertical(&m, 2).unwrap().unsplit(), m);
    }

    #[test]
    fn zero_pad_noop_when_divisible() {
        let a = Matrix::<f64>::identity(4);
        let q = Matrix::<f64>::identity(4);
        let v = Vector::zeros(4);
        let p = zero_pad(&a, &q, &v, &v, 2).unwrap();
        assert_eq!(p.a, a);
        assert_eq!(p.original_n, 4);
    }

    #[test]
    fn zero_pad_extends_with_zeros() {
        let a = Matrix::<f64>::identity(3);
        let q = Matrix::<f64>::identity(3);
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let p = zero_pad(&a, &q, &v, &v, 2).unwrap();
        assert_eq!(p.a.rows(), 4);
        for j in 0..4 {
            assert_eq!(*p.a.get(3, j), 0.0);
            assert_eq!(*p.a.get(j, 3), 0.0);
        }
        assert_eq!(p.y[3], 0.0);
    }

    #[test]
    fn spectral_radius_diagonal() {
        let a = Matrix::from_vec(2, 2, vec![0.5, 0.0, 0.0, 0.25]).unwrap();
        let est = spectral_radius_estimate(&a, 300, 1);
        assert!((est - 0.5).abs() < 1e-6, "estimate {est}");
    }

    #[test]
    fn spectral_radius_identity_and_zero() {
        assert!((spectral_radius_estimate(&Matrix::identity(2), 50, 1) - 1.0).abs() < 1e-12);
        assert_eq!(spectral_radius_estimate(&Matrix::zeros(3, 3), 50, 1), 0.0);
    }

    #[test]
    fn solve_exact_system() {
        let a = Matrix::from_vec(2, 2, vec![rat(2, 1), rat(1, 1), rat(1, 1), rat(3, 1)]).unwrap();
        let b = Vector::from_vec(vec![rat(3, 1), rat(4, 1)]);
        let x = solve_linear(&a, &b).unwrap();
        assert_eq!(a.mat_vec(&x).unwrap(), b);
    }

    #[test]
    fn solve_detects_singular() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(
            solve_linear(&a, &Vector::zeros(2)),
            Err(LinalgError::Singular)
        ));
    }

    #[test]
    fn text_format_round_trip() {
        let m = Matrix::from_fn(2, 3, |i, j| rat(i as i64 * 3 - j as i64, 2));
        let text = format_matrix_text(&m);
        assert!(text.starts_with("2 3\n"));
        assert_eq!(parse_matrix_text::<Rational>(&text).unwrap(), m);

        let f = Matrix::from_fn(2, 2, |i, j| i as f64 + j as f64 * 0.5);
        assert_eq!(
            parse_matrix_text::<f64>(&format_matrix_text(&f)).unwrap(),
            f
        );
    }

    #[test]
    fn text_format_rejects_bad_input() {
        assert!(parse_matrix_text::<f64>("").is_err());
        assert!(parse_matrix_text::<f64>("2 2\n1 2\n3").is_err());
        assert!(parse_matrix_text::<f64>("2 2\n1 2\n3 abc").is_err());
    }
}
