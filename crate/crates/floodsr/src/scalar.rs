//! Scalar abstraction the numeric core is generic over.

use num_traits::{Float, FloatConst, NumAssignOps};
use std::fmt::{Debug, Display};

/// Floating-point scalar used for grids, kernels, network math, and losses.
///
/// Implemented for `f32` and `f64`. The shipped pipeline runs at `f64`
/// ([`crate::Real`]): several contract tolerances (loss anchors at 1e-9,
/// beta-quantile bisection at 1e-10) are below `f32` resolution.
pub trait Scalar:
    Float + FloatConst + NumAssignOps + Debug + Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn from_usize(n: usize) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn from_usize(n: usize) -> Self {
        n as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn from_usize(n: usize) -> Self {
        n as f64
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
