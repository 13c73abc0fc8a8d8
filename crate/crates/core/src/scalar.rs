//! Number abstraction shared by the exact (rational) and oracle (f64) solver paths.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arithmetic needed by the scaling engine.
///
/// `BigRational` is exact and every tolerance collapses to zero; `f64` carries
/// relative tolerances supplied by the caller.
pub trait Scalar:
    Clone
    + PartialOrd
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
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_ratio(r: &BigRational) -> Self;
    fn to_f64(&self) -> f64;
    fn abs(&self) -> Self;

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    fn is_positive(&self) -> bool {
        *self > Self::zero()
    }

    fn is_negative(&self) -> bool {
        *self < Self::zero()
    }

    /// `rel * |scale|` in floating point, exactly zero for rationals.
    fn slack(scale: &Self, rel: f64) -> Self;

    fn is_integral(&self) -> bool;

    fn floor(&self) -> Self;

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_ratio(r: &BigRational) -> Self {
        r.clone()
    }
    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn slack(_scale: &Self, _rel: f64) -> Self {
        Zero::zero()
    }
    fn is_integral(&self) -> bool {
        self.is_integer()
    }
    fn floor(&self) -> Self {
        BigRational::from_integer(num_integer::Integer::div_floor(self.numer(), self.denom()))
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_ratio(r: &BigRational) -> Self {
        ratio_to_f64(r)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn slack(scale: &Self, rel: f64) -> Self {
        rel * f64::abs(*scale)
    }
    fn is_integral(&self) -> bool {
        self.is_finite() && self.fract() == 0.0
    }
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
}

/// Converts a big rational to the nearest representable f64 (handles huge
/// numerators/denominators that overflow a direct `to_f64`).
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = nb - db - 60;
    let scaled = if shift > 0 {
        BigRational::new(r.numer().clone(), r.denom().clone() << (shift as usize))
    } else {
        BigRational::new(r.numer().clone() << ((-shift) as usize), r.denom().clone())
    };
    scaled.to_integer().to_f64().unwrap_or(0.0) * 2f64.powi(shift as i32)
}

/// Exact rational conversion of a finite f64.
pub fn f64_to_ratio(v: f64) -> Option<BigRational> {
    BigRational::from_float(v)
}

/// A value of the extended real line used for gain values and excesses:
/// immense arcs evaluate to minus infinity at their lower bound.
#[derive(Clone, Debug, PartialEq)]
pub enum Extended<S> {
    NegInfinity,
    Finite(S),
}

impl<S: Scalar> Extended<S> {
    pub fn finite(&self) -> Option<&S> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::NegInfinity => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn add(&self, other: &Extended<S>) -> Extended<S> {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a.clone() + b.clone()),
            _ => Extended::NegInfinity,
        }
    }

    pub fn add_finite(&self, v: &S) -> Extended<S> {
        match self {
            Extended::Finite(a) => Extended::Finite(a.clone() + v.clone()),
            Extended::NegInfinity => Extended::NegInfinity,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Extended::Finite(v) => v.to_f64(),
            Extended::NegInfinity => f64::NEG_INFINITY,
        }
    }
}

impl<S: fmt::Display> fmt::Display for Extended<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::NegInfinity => write!(f, "-inf"),
        }
    }
}

/// Node multiplier. The main solvers keep every label finite; `Infinite`
/// appears only in optimality certificates.
#[derive(Clone, Debug, PartialEq)]
pub enum Label<S> {
    Finite(S),
    Infinite,
}

impl<S: Scalar> Label<S> {
    pub fn finite(&self) -> Option<&S> {
        match self {
            Label::Finite(v) => Some(v),
            Label::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Label::Infinite)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Label::Finite(v) => v.to_f64(),
            Label::Infinite => f64::INFINITY,
        }
    }
}

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn integer(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huge_ratio_converts() {
        let big = BigRational::new(BigInt::from(3) << 2000usize, BigInt::from(1) << 1999usize);
        assert!((ratio_to_f64(&big) - 6.0).abs() < 1e-12);
        assert_eq!(ratio_to_f64(&rational(1, 4)), 0.25);
    }

    #[test]
    fn exact_slack_is_zero() {
        assert!(Scalar::is_zero(&<BigRational as Scalar>::slack(&integer(7), 0.1)));
        assert!((<f64 as Scalar>::slack(&-2.0, 0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn extended_arithmetic() {
        let a: Extended<f64> = Extended::Finite(1.0);
        assert_eq!(a.add(&Extended::Finite(2.0)), Extended::Finite(3.0));
        assert_eq!(a.add(&Extended::NegInfinity), Extended::NegInfinity);
    }
}
