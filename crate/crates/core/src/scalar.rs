//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the physics is written against: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Tolerance used when validating unit norms and orthonormality.
    fn validation_tolerance() -> Self;
}

impl Real for f32 {
    fn validation_tolerance() -> Self {
        1e-5
    }
}

impl Real for f64 {
    fn validation_tolerance() -> Self {
        1e-10
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in target scalar")
}

/// Lossy conversion back to `f64` for reporting and sampling.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Clamps `x` into `[lo, hi]` and reports whether clamping changed it.
#[inline]
pub fn clamp_flagged<T: Real>(x: T, lo: T, hi: T) -> (T, bool) {
    if x < lo {
        (lo, true)
    } else if x > hi {
        (hi, true)
    } else {
        (x, false)
    }
}
