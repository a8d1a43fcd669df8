//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance used when checking that probabilities sum to one.
    fn probability_tolerance() -> Self {
        lit::<Self>(1e-12).max(Self::epsilon() * lit(16.0))
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into `R`.
#[inline]
pub fn lit<R: Real>(value: f64) -> R {
    R::from_f64(value).expect("f64 literal representable in scalar type")
}

/// Converts `R` into `f64` (lossless for `f32` and `f64`).
#[inline]
pub fn to_f64<R: Real>(value: R) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Converts a count into `R`.
#[inline]
pub fn from_usize<R: Real>(n: usize) -> R {
    R::from_usize(n).expect("count representable in scalar type")
}
