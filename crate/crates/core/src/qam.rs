//! Unnormalized square QAM: per-axis levels -(L-1), ..., -1, 1, ..., L-1.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Qam {
    bits: u32,
    levels: u32,
}

impl Qam {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits % 2 != 0 || bits > 16 {
            return Err(Error::Config(format!(
                "square QAM needs an even, positive number of bits (got {bits})"
            )));
        }
        Ok(Self {
            bits,
            levels: 1 << (bits / 2),
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn order(&self) -> u64 {
        1u64 << self.bits
    }

    /// 2(2^mu - 1)/3.
    pub fn mean_power(&self) -> f64 {
        2.0 * (self.order() as f64 - 1.0) / 3.0
    }

    fn level(&self, index: u32) -> f64 {
        2.0 * index as f64 - (self.levels as f64 - 1.0)
    }

    pub fn random_symbol<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> Complex<T> {
        let i = rng.random_range(0..self.levels);
        let q = rng.random_range(0..self.levels);
        Complex::new(T::of(self.level(i)), T::of(self.level(q)))
    }

    fn slice_axis(&self, x: f64) -> f64 {
        let top = self.levels as f64 - 1.0;
        // Nearest odd integer, clamped to the outermost level.
        let idx = ((x + top) / 2.0).round().clamp(0.0, self.levels as f64 - 1.0);
        2.0 * idx - top
    }

    /// Minimum-distance decision.
    pub fn decide<T: Real>(&self, z: Complex<T>) -> Complex<T> {
        Complex::new(
            T::of(self.slice_axis(z.re.to_f64_lossy())),
            T::of(self.slice_axis(z.im.to_f64_lossy())),
        )
    }
}

/// Textbook symbol error probability of square 2^mu-QAM over AWGN at
/// per-symbol SNR `snr` (linear):
/// 2(1 - 1/sqrt(Q)) erfc(x) - (1 - 1/sqrt(Q))^2 erfc(x)^2,
/// x = sqrt(3 snr / (2 (Q - 1))).
pub fn square_qam_ser(bits: u32, snr: f64) -> f64 {
    let order = (1u64 << bits) as f64;
    let a = 1.0 - 1.0 / order.sqrt();
    let e = libm::erfc((1.5 * snr / (order - 1.0)).sqrt());
    2.0 * a * e - a * a * e * e
}
