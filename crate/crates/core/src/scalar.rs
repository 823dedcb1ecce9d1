//! Numeric abstraction for node-quality arithmetic.
//!
//! Heuristic formulas are written once against [`Scalar`] so they can be
//! evaluated in floating point for search and in exact rationals for
//! checking.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::Num;

pub trait Scalar: Num + Copy + PartialOrd + Debug {
    /// Converts an event count. Counts above 2^53 lose precision in floats.
    fn from_count(n: u64) -> Self;

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }
}

impl Scalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }
}

impl Scalar for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }
}

impl Scalar for Ratio<i64> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count fits in i64"))
    }
}

impl Scalar for Ratio<i128> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i128::from(n))
    }
}
