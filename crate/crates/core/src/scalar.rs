//! Scalar abstraction shared by the numerical modules.
//!
//! Everything that is pure math (transfer functions, field synthesis, the
//! analytic QBER and key-rate model) is written against [`Real`] so it runs in
//! `f32` as well as `f64`. The experiment runner and the CLI fix `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar usable throughout the simulator.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count into this scalar.
    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon of this type.
    #[inline]
    fn eps() -> Self {
        <Self as Float>::epsilon()
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + FftNum
        + Default
        + Debug
        + Display
        + Sum
        + Send
        + Sync
        + 'static
{
}

/// Converts a power ratio in dB to a linear factor.
#[inline]
pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Converts a linear power ratio to dB.
#[inline]
pub fn linear_to_db<T: Real>(ratio: T) -> T {
    T::lit(10.0) * ratio.log10()
}

/// Amplitude factor corresponding to a power loss in dB.
#[inline]
pub fn loss_amplitude<T: Real>(loss_db: T) -> T {
    T::lit(10.0).powf(-loss_db / T::lit(20.0))
}
