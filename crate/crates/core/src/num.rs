//! Scalar abstraction shared by the signal-path code.
//!
//! Waveform synthesis, channel application, equalization and periodogram
//! estimation are written once over [`Real`] and instantiated for `f32` and
//! `f64`. The closed-form link analytics and the allocator run in `f64` only.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point type usable on the sample path.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Default + Debug + Display + Sum
{
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("representable constant")
    }

    /// Conversion from an index or count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("representable count")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `exp(j * phase)`.
#[inline]
pub fn cis<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

/// Converts a complex sample between precisions.
#[inline]
pub fn cast_complex<A: Real, B: Real>(z: Complex<A>) -> Complex<B> {
    Complex::new(B::of(z.re.to_f64_lossy()), B::of(z.im.to_f64_lossy()))
}

/// Watts to dBm. Zero power maps to negative infinity.
pub fn watts_to_dbm(p: f64) -> f64 {
    10.0 * (p * 1000.0).log10()
}

/// dBm to watts. `+inf` dBm maps to `+inf` watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
