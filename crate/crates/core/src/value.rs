//! Canonical accumulated-reward values.
//!
//! Transitions of the lifted system match `s' = s + r(x, a)` by equality, so
//! accumulated rewards need a representation where that equality is exact.
//! Rewards that are small-denominator rationals are tracked exactly; anything
//! else is snapped to a fixed grid before deduplication.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Largest denominator accepted for exact rational tracking.
pub const MAX_EXACT_DENOMINATOR: u64 = 1_000_000;

/// Spacing of the fallback grid.
pub const GRID_UNIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Arithmetic {
    /// Rewards are ratios of integers with denominators at most [`MAX_EXACT_DENOMINATOR`].
    Exact,
    /// Rewards are multiples of [`GRID_UNIT`] after rounding.
    Grid,
}

/// An accumulated-reward value in canonical form.
///
/// Within one model every value uses the same variant, so the derived
/// ordering is the numeric ordering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RewardValue {
    Exact(BigRational),
    Grid(i128),
}

impl RewardValue {
    pub fn zero(mode: Arithmetic) -> Self {
        match mode {
            Arithmetic::Exact => RewardValue::Exact(BigRational::zero()),
            Arithmetic::Grid => RewardValue::Grid(0),
        }
    }

    /// Canonicalizes `v` under `mode`. Returns `None` in exact mode when `v`
    /// has no small-denominator rational form.
    pub fn from_f64(v: f64, mode: Arithmetic) -> Option<Self> {
        match mode {
            Arithmetic::Exact => rationalize(v, MAX_EXACT_DENOMINATOR).map(RewardValue::Exact),
            Arithmetic::Grid => Some(RewardValue::Grid((v / GRID_UNIT).round() as i128)),
        }
    }

    pub fn add(&self, other: &RewardValue) -> RewardValue {
        match (self, other) {
            (RewardValue::Exact(a), RewardValue::Exact(b)) => RewardValue::Exact(a + b),
            (RewardValue::Grid(a), RewardValue::Grid(b)) => RewardValue::Grid(a + b),
            _ => panic!("mixed reward arithmetic"),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            RewardValue::Exact(r) => ratio_to_f64(r),
            RewardValue::Grid(k) => *k as f64 * GRID_UNIT,
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            RewardValue::Exact(r) => Some(r),
            RewardValue::Grid(_) => None,
        }
    }
}

impl fmt::Display for RewardValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardValue::Exact(r) if r.is_integer() => write!(f, "{}", r.numer()),
            RewardValue::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            RewardValue::Grid(_) => write!(f, "{}", self.to_f64()),
        }
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    // Correctly rounded when both parts are exactly representable.
    let limit = BigInt::from(1u64 << 53);
    if r.numer().abs() < limit && r.denom() < &limit {
        r.numer().to_f64().unwrap() / r.denom().to_f64().unwrap()
    } else {
        r.to_f64().unwrap_or(f64::NAN)
    }
}

/// Closest rational to `x` with denominator at most `max_den`.
pub fn limit_denominator(x: &BigRational, max_den: u64) -> BigRational {
    let max_den = BigInt::from(max_den);
    if x.denom() <= &max_den {
        return x.clone();
    }
    let negative = x.is_negative();
    let ax = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (BigInt::zero(), BigInt::one(), BigInt::one(), BigInt::zero());
    let (mut n, mut d) = (ax.numer().clone(), ax.denom().clone());
    loop {
        let a = n.div_floor(&d);
        let q2 = &q0 + &a * &q1;
        if q2 > max_den {
            break;
        }
        let p2 = &p0 + &a * &p1;
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        let rem = &n - &a * &d;
        n = std::mem::replace(&mut d, rem);
    }
    let k = (&max_den - &q0).div_floor(&q1);
    let bound1 = BigRational::new(&p0 + &k * &p1, &q0 + &k * &q1);
    let bound2 = BigRational::new(p1, q1);
    let best = if (&bound2 - &ax).abs() <= (&bound1 - &ax).abs() {
        bound2
    } else {
        bound1
    };
    if negative {
        -best
    } else {
        best
    }
}

/// Recovers `p/q` with `q <= max_den` such that `p/q` rounds back to `v`.
pub fn rationalize(v: f64, max_den: u64) -> Option<BigRational> {
    let exact = BigRational::from_float(v)?;
    let candidate = limit_denominator(&exact, max_den);
    (ratio_to_f64(&candidate) == v).then_some(candidate)
}

/// Chooses the arithmetic mode for a collection of rewards.
pub fn detect_arithmetic<'a>(values: impl IntoIterator<Item = &'a f64>) -> Arithmetic {
    for &v in values {
        if rationalize(v, MAX_EXACT_DENOMINATOR).is_none() {
            return Arithmetic::Grid;
        }
    }
    Arithmetic::Exact
}
