use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point element type for tensors and model parameters.
///
/// Implemented for `f32` and `f64`. Gradient checking and training default to
/// `f64`; `f32` is available for faster inference.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

macro_rules! impl_scalar {
    ($($t:ty)*) => ($(
        impl Scalar for $t {
            #[inline]
            fn from_f64_lossy(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
        }
    )*)
}

impl_scalar!(f32 f64);

/// Shorthand for building a scalar from a literal.
#[inline]
pub fn s<S: Scalar>(v: f64) -> S {
    S::from_f64_lossy(v)
}
