//! Element type abstraction for the numeric kernel.
//!
//! The pipeline computes in `f32`; gradient verification instantiates the
//! same code with `f64` ("check mode") so finite differences are meaningful.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign};

/// Scalar element of a [`crate::nn::Tensor`]. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + NumAssign + ndarray::LinalgScalar + Sum + Debug + Display + Send + Sync + 'static
{
    /// Large negative logit used to mask attention positions. Chosen so that
    /// `exp(BIG_NEG - max_logit)` underflows to exactly `0.0`.
    const BIG_NEG: Self;

    fn from_f64(x: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Scalar for f32 {
    const BIG_NEG: Self = -1.0e30;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn into_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const BIG_NEG: Self = -1.0e300;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }

    #[inline]
    fn into_f64(self) -> f64 {
        self
    }
}
