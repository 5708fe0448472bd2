//! Numeric backends for the clock and protocol arithmetic.
//!
//! Everything the protocol computes is field arithmetic (add, subtract,
//! multiply, divide), so the same code runs on hardware floats and on exact
//! big rationals. The rational backend is what the test-suite uses to check
//! algebraic identities without roundoff.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// A real-number backend: `f32`, `f64` or [`BigRational`].
pub trait Scalar:
    Num + Signed + PartialOrd + Clone + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Converts a finite `f64`. Rationals take the exact binary value.
    fn of(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(|| panic!("{value} is not representable"))
    }

    /// Nearest `f64`, used for output and reporting.
    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).unwrap_or_else(|| panic!("{n} is not representable"))
    }

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    fn is_finite_value(&self) -> bool;
}

impl Scalar for f32 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for BigRational {
    fn of(value: f64) -> Self {
        BigRational::from_float(value).unwrap_or_else(|| panic!("{value} is not representable"))
    }

    fn from_count(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn is_finite_value(&self) -> bool {
        true
    }
}
