//! Scalar bound shared by every probability table in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable as a probability: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Tolerance for "sums to one" checks on tables of this precision.
    fn norm_tolerance() -> Self;

    /// Amount of negative rounding noise tolerated before clamping an
    /// information quantity to zero.
    fn clamp_tolerance() -> Self;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn norm_tolerance() -> Self {
        1e-9
    }

    fn clamp_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn norm_tolerance() -> Self {
        1e-4
    }

    fn clamp_tolerance() -> Self {
        1e-5
    }
}

/// `x · ln x` with the convention `0 · ln 0 = 0`.
pub(crate) fn xlogx<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x * x.ln()
    } else {
        T::zero()
    }
}

/// Clamps rounding noise below zero; genuinely negative values pass through.
pub(crate) fn clamp_nonneg<T: Scalar>(x: T) -> T {
    if x < T::zero() && x >= -T::clamp_tolerance() {
        T::zero()
    } else {
        x
    }
}
