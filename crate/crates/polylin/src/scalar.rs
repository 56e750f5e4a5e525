//! Scalar field abstraction with two concrete backends.
//!
//! `Rational` is exact arbitrary-precision arithmetic and is the correctness
//! authority: interpolation-based decoding is exact there, so protocol tests
//! can assert bit equality. `f64` is the performance path. Everything above
//! this module is generic over [`Scalar`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which concrete field a scalar type realizes. Serialized as a one-byte tag
/// in binary payloads and as `"exact"` / `"float"` in configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    Float,
}

impl Backend {
    pub fn tag(self) -> u8 {
        match self {
            Backend::Float => 0,
            Backend::Exact => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Backend::Float),
            1 => Some(Backend::Exact),
            _ => None,
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => write!(f, "exact"),
            Backend::Float => write!(f, "float"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScalarError {
    #[error("cannot parse scalar from {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("malformed scalar bytes: {0}")]
    Codec(String),
    #[error("non-finite float cannot be represented exactly")]
    NonFinite,
}

/// Field element used by all linear algebra in this crate.
///
/// Implementations must satisfy the field axioms up to their backend's
/// semantics: exactly for [`Rational`], approximately (IEEE 754) for `f64`.
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const BACKEND: Backend;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    /// Exact ratio constructor; panics if `den == 0`.
    fn from_ratio(num: i64, den: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn is_negative(&self) -> bool;
    /// Compare `|self|` with `|other|`; used for pivot selection.
    fn abs_cmp(&self, other: &Self) -> Ordering;
    /// Nearest binary64 value (used for norms and reports).
    fn to_f64(&self) -> f64;

    /// Parse the text-format representation: decimal (`-1.25`, `3e-2`) or
    /// ratio (`p/q`) or integer. Exact backends parse decimals exactly.
    fn parse_text(s: &str) -> Result<Self, ScalarError>;

    /// Append the binary encoding used by shard payloads.
    fn encode(&self, out: &mut Vec<u8>);
    /// Inverse of [`Scalar::encode`]; consumes from the front of `input`.
    fn decode(input: &mut &[u8]) -> Result<Self, ScalarError>;

    /// Default evaluation points for `p` workers: distinct and nonzero.
    /// The float backend clusters them near 1 so the power towers
    /// `xi^(m^(i-1))` neither vanish nor explode; the exact backend uses
    /// the integers `1..=p`.
    ///
    /// The point set is handed to workers in bit-reversed index order (see
    /// [`prefix_spread_order`]): with no stragglers the master hears from an
    /// index prefix of workers, and a prefix that spreads across the full
    /// point range keeps the decoder's coefficient-extraction weights an
    /// order of magnitude smaller than a contiguous cluster would.
    fn default_eval_points(p: usize) -> Vec<Self>;

    /// `self^e` by binary powering.
    fn pow_u64(&self, e: u64) -> Self {
        let mut base = self.clone();
        let mut e = e;
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Exact rationals
// ---------------------------------------------------------------------------

/// Arbitrary-precision rational, always in lowest terms with positive
/// denominator (maintained by the underlying representation).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_integer(v: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_big(num: BigInt, den: BigInt) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        Rational(BigRational::new(num, den))
    }

    /// Exact lift of a finite binary64 value (every finite f64 is rational).
    pub fn from_f64_exact(v: f64) -> Result<Self, ScalarError> {
        BigRational::from_float(v)
            .map(Rational)
            .ok_or(ScalarError::NonFinite)
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    /// Parse a decimal literal like `-12.5e-3` into the exact ratio it denotes.
    fn parse_decimal(s: &str) -> Option<Self> {
        let (mantissa, exp10) = match s.find(['e', 'E']) {
            Some(pos) => {
                let e: i64 = s[pos + 1..].parse().ok()?;
                (&s[..pos], e)
            }
            None => (s, 0i64),
        };
        let (int_part, frac_part) = match mantissa.find('.') {
            Some(pos) => (&mantissa[..pos], &mantissa[pos + 1..]),
            None => (mantissa, ""),
        };
        let digits = format!("{}{}", int_part.trim_start_matches(['+', '-']), frac_part);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let mut num: BigInt = digits.parse().ok()?;
        if mantissa.starts_with('-') {
            num = -num;
        }
        let shift = exp10 - frac_part.len() as i64;
        let ten = BigInt::from(10);
        if shift >= 0 {
            Some(Rational(BigRational::from_integer(
                num * ten.pow(shift as u32),
            )))
        } else {
            Some(Rational(BigRational::new(num, ten.pow(-shift as u32))))
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        Rational(self.0 + rhs.0)
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Rational) -> Rational {
        Rational(self.0 - rhs.0)
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Rational) -> Rational {
        Rational(self.0 * rhs.0)
    }
}

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        assert!(!rhs.0.is_zero(), "division by zero");
        Rational(self.0 / rhs.0)
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

fn encode_bigint(v: &BigInt, out: &mut Vec<u8>) {
    let (sign, bytes) = v.to_bytes_le();
    out.push(match sign {
        Sign::Minus => 2,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    });
    out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&bytes);
}

fn decode_bigint(input: &mut &[u8]) -> Result<BigInt, ScalarError> {
    let err = || ScalarError::Codec("truncated bigint".into());
    if input.is_empty() {
        return Err(err());
    }
    let sign = match input[0] {
        0 => Sign::NoSign,
        1 => Sign::Plus,
        2 => Sign::Minus,
        other => {
            return Err(ScalarError::Codec(format!("bad sign byte {other}")));
        }
    };
    *input = &input[1..];
    if input.len() < 8 {
        return Err(err());
    }
    let len = u64::from_le_bytes(input[..8].try_into().unwrap()) as usize;
    *input = &input[8..];
    if input.len() < len {
        return Err(err());
    }
    let v = BigInt::from_bytes_le(sign, &input[..len]);
    *input = &input[len..];
    Ok(v)
}

impl Scalar for Rational {
    const BACKEND: Backend = Backend::Exact;

    fn zero() -> Self {
        Rational(BigRational::zero())
    }

    fn one() -> Self {
        Rational(BigRational::one())
    }

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(v)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(num, den)
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    fn abs_cmp(&self, other: &Self) -> Ordering {
        self.0.abs().cmp(&other.0.abs())
    }

    fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    fn parse_text(s: &str) -> Result<Self, ScalarError> {
        let s = s.trim();
        let fail = |reason: &str| ScalarError::Parse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        if let Some((num, den)) = s.split_once('/') {
            let n: BigInt = num.trim().parse().map_err(|_| fail("bad numerator"))?;
            let d: BigInt = den.trim().parse().map_err(|_| fail("bad denominator"))?;
            if d.is_zero() {
                return Err(fail("zero denominator"));
            }
            return Ok(Rational(BigRational::new(n, d)));
        }
        if let Ok(n) = s.parse::<BigInt>() {
            return Ok(Rational(BigRational::from_integer(n)));
        }
        Rational::parse_decimal(s).ok_or_else(|| fail("expected integer, p/q or decimal"))
    }

    fn encode(&self, out: &mut Vec<u8>) {
        encode_bigint(self.0.numer(), out);
        encode_bigint(self.0.denom(), out);
    }

    fn decode(input: &mut &[u8]) -> Result<Self, ScalarError> {
        let num = decode_bigint(input)?;
        let den = decode_bigint(input)?;
        if den.is_zero() {
            return Err(ScalarError::Codec("zero denominator".into()));
        }
        Ok(Rational(BigRational::new(num, den)))
    }

    fn default_eval_points(p: usize) -> Vec<Self> {
        prefix_spread_order(p)
            .into_iter()
            .map(|j| Rational::from_integer(j as i64 + 1))
            .collect()
    }
}

/// Bit-reversal permutation of `0..p`: every prefix of the returned order is
/// spread nearly evenly across the whole range. Used to assign evaluation
/// points to workers so the fastest-K prefix of a homogeneous cluster holds
/// a well-spread point subset (clustered subsets make polynomial coefficient
/// extraction needlessly ill-conditioned).
pub fn prefix_spread_order(p: usize) -> Vec<usize> {
    if p <= 2 {
        return (0..p).collect();
    }
    let bits = usize::BITS - (p - 1).leading_zeros();
    let mut out = Vec::with_capacity(p);
    for i in 0..(1usize << bits) {
        let r = i.reverse_bits() >> (usize::BITS - bits);
        if r < p {
            out.push(r);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Binary64
// ---------------------------------------------------------------------------

impl Scalar for f64 {
    const BACKEND: Backend = Backend::Float;

    fn zero() -> Self {
        0.0
    }

    fn one() -> Self {
        1.0
    }

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        num as f64 / den as f64
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    fn is_negative(&self) -> bool {
        *self < 0.0
    }

    fn abs_cmp(&self, other: &Self) -> Ordering {
        self.abs().total_cmp(&other.abs())
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn parse_text(s: &str) -> Result<Self, ScalarError> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let n: f64 = num.trim().parse().map_err(|_| ScalarError::Parse {
                input: s.to_string(),
                reason: "bad numerator".into(),
            })?;
            let d: f64 = den.trim().parse().map_err(|_| ScalarError::Parse {
                input: s.to_string(),
                reason: "bad denominator".into(),
            })?;
            if d == 0.0 {
                return Err(ScalarError::Parse {
                    input: s.to_string(),
                    reason: "zero denominator".into(),
                });
            }
            return Ok(n / d);
        }
        s.parse().map_err(|_| ScalarError::Parse {
            input: s.to_string(),
            reason: "expected a decimal number".into(),
        })
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_bits().to_le_bytes());
    }

    fn decode(input: &mut &[u8]) -> Result<Self, ScalarError> {
        if input.len() < 8 {
            return Err(ScalarError::Codec("truncated f64".into()));
        }
        let v = f64::from_bits(u64::from_le_bytes(input[..8].try_into().unwrap()));
        *input = &input[8..];
        Ok(v)
    }

    fn default_eval_points(p: usize) -> Vec<Self> {
        prefix_spread_order(p)
            .into_iter()
            .map(|j| 1.0 + j as f64 / (4.0 * p as f64))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_lowest_terms_positive_denominator() {
        let r = Rational::new(4, -6);
        assert_eq!(r.numer(), &BigInt::from(-2));
        assert_eq!(r.denom(), &BigInt::from(3));
    }

    #[test]
    fn rational_parse_forms() {
        assert_eq!(Rational::parse_text("3/4").unwrap(), Rational::new(3, 4));
        assert_eq!(
            Rational::parse_text("-7").unwrap(),
            Rational::from_integer(-7)
        );
        assert_eq!(Rational::parse_text("1.5").unwrap(), Rational::new(3, 2));
        assert_eq!(
            Rational::parse_text("-2.5e-1").unwrap(),
            Rational::new(-1, 4)
        );
        assert_eq!(
            Rational::parse_text("25e2").unwrap(),
            Rational::from_integer(2500)
        );
        assert!(Rational::parse_text("1/0").is_err());
        assert!(Rational::parse_text("abc").is_err());
    }

    #[test]
    fn rational_display_round_trips() {
        for r in [
            Rational::new(-3, 7),
            Rational::from_integer(12),
            Rational::zero(),
        ] {
            let s = r.to_string();
            assert_eq!(Rational::parse_text(&s).unwrap(), r);
        }
    }

    #[test]
    fn rational_codec_round_trips() {
        for r in [
            Rational::new(-123456789, 987654),
            Rational::zero(),
            Rational::from_f64_exact(0.1).unwrap(),
        ] {
            let mut buf = Vec::new();
            r.encode(&mut buf);
            let mut slice = buf.as_slice();
            assert_eq!(Rational::decode(&mut slice).unwrap(), r);
            assert!(slice.is_empty());
        }
    }

    #[test]
    fn float_parse_accepts_ratio() {
        assert_eq!(f64::parse_text("1/2").unwrap(), 0.5);
        assert_eq!(f64::parse_text("-1.25").unwrap(), -1.25);
    }

    #[test]
    fn pow_u64_matches_repeated_multiplication() {
        let x = Rational::new(3, 2);
        let mut acc = Rational::one();
        for e in 0..10u64 {
            assert_eq!(x.pow_u64(e), acc);
            acc = acc * x.clone();
        }
        assert_eq!(2.0f64.pow_u64(10), 1024.0);
    }

    #[test]
    fn eval_points_distinct_nonzero() {
        let exact = Rational::default_eval_points(8);
        let float = f64::default_eval_points(8);
        for points in [
            &exact.iter().map(|x| x.to_f64()).collect::<Vec<_>>(),
            &float,
        ] {
            for (i, a) in points.iter().enumerate() {
                assert!(*a != 0.0);
                for b in &points[i + 1..] {
                    assert!(a != b);
                }
            }
        }
    }

    #[test]
    fn from_f64_exact_is_exact() {
        let r = Rational::from_f64_exact(0.1).unwrap();
        assert_eq!(r.to_f64(), 0.1);
        assert!(Rational::from_f64_exact(f64::INFINITY).is_err());
    }

    #[test]
    fn spread_order_is_permutation_with_spread_prefixes() {
        for p in [1usize, 2, 3, 6, 8, 10, 18, 31] {
            let order = prefix_spread_order(p);
            let mut sorted = order.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..p).collect::<Vec<_>>(), "p={p}");
        }
        // the first half of a power-of-two range is the even indices
        assert_eq!(prefix_spread_order(8)[..4], [0, 4, 2, 6]);
        // point sets keep the pinned values, only reordered
        let pts = f64::default_eval_points(10);
        let mut vals = pts.clone();
        vals.sort_by(f64::total_cmp);
        let expect: Vec<f64> = (0..10).map(|j| 1.0 + j as f64 / 40.0).collect();
        assert_eq!(vals, expect);
    }
}
