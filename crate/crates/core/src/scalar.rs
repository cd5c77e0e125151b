//! Floating-point abstraction the numerical core is written against.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar usable throughout the crate: `f32` or `f64`.
///
/// Everything numeric (Bessel evaluation, Cholesky, FFT convolution,
/// simulation) is generic over this trait. Tolerances quoted in the docs
/// refer to `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Short name written into file headers.
    const NAME: &'static str;

    #[inline]
    fn of(v: f64) -> Self {
        // f64 -> f32/f64 never fails; out-of-range values saturate to inf.
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::of(v as f64)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}
