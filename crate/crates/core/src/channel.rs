//! Frequency-selective Rayleigh block fading, AWGN and one-tap frequency
//! domain equalization.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::num::{cast_complex, Real};
use crate::seed;

/// Magnitude below which a frequency bin counts as a spectral null.
pub const DEEP_FADE_FLOOR: f64 = 1e-12;

/// Exponentially decaying profile 10^(-i/(n-1)), unnormalized.
pub fn exponential_pdp(n_taps: usize) -> Vec<f64> {
    if n_taps == 1 {
        return vec![1.0];
    }
    (0..n_taps)
        .map(|i| 10f64.powf(-(i as f64) / (n_taps as f64 - 1.0)))
        .collect()
}

/// Rescales a profile to unit total power.
pub fn normalize_pdp(pdp: &[f64]) -> Vec<f64> {
    let total: f64 = pdp.iter().sum();
    pdp.iter().map(|p| p / total).collect()
}

fn check_pdp(pdp: &[f64]) -> Result<()> {
    if pdp.is_empty() {
        return Err(Error::Domain("power delay profile is empty".into()));
    }
    if let Some(p) = pdp.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
        return Err(Error::Domain(format!("tap variance {p} is not positive")));
    }
    Ok(())
}

/// Circularly-symmetric complex Gaussian sample with E|z|^2 = `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex<f64> {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re * s, im * s)
}

/// Channel taps together with their `fft_len`-point frequency response.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    taps: Vec<Complex<T>>,
    freq_response: Vec<Complex<T>>,
    pdp: Vec<f64>,
}

impl<T: Real> ChannelRealization<T> {
    /// Deterministic channel from given taps; the profile is set to |h_i|^2.
    pub fn from_taps(taps: Vec<Complex<T>>, fft_len: usize) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Domain("channel needs at least one tap".into()));
        }
        if taps.len() > fft_len {
            return Err(Error::Domain(format!(
                "{} taps do not fit a {fft_len}-point transform",
                taps.len()
            )));
        }
        let pdp = taps.iter().map(|h| h.norm_sqr().to_f64_lossy()).collect();
        Ok(Self::with_pdp(taps, fft_len, pdp))
    }

    fn with_pdp(taps: Vec<Complex<T>>, fft_len: usize, pdp: Vec<f64>) -> Self {
        let mut freq_response = vec![Complex::zero(); fft_len];
        freq_response[..taps.len()].copy_from_slice(&taps);
        FftPlanner::new()
            .plan_fft_forward(fft_len)
            .process(&mut freq_response);
        Self {
            taps,
            freq_response,
            pdp,
        }
    }

    pub fn taps(&self) -> &[Complex<T>] {
        &self.taps
    }

    pub fn freq_response(&self) -> &[Complex<T>] {
        &self.freq_response
    }

    pub fn pdp(&self) -> &[f64] {
        &self.pdp
    }

    pub fn n_taps(&self) -> usize {
        self.taps.len()
    }

    /// First bin whose magnitude falls below [`DEEP_FADE_FLOOR`].
    pub fn deep_fade(&self) -> Option<(usize, f64)> {
        self.freq_response
            .iter()
            .map(|h| h.norm().to_f64_lossy())
            .enumerate()
            .find(|(_, m)| !(*m >= DEEP_FADE_FLOOR))
    }

    /// |H[p]|^2 in f64.
    pub fn power_response(&self) -> Vec<f64> {
        self.freq_response
            .iter()
            .map(|h| h.norm_sqr().to_f64_lossy())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tap_index,re,im")?;
        for (i, h) in self.taps.iter().enumerate() {
            writeln!(w, "{i},{:.12e},{:.12e}", h.re.to_f64_lossy(), h.im.to_f64_lossy())?;
        }
        Ok(())
    }
}

/// Draws independent taps h_i ~ CN(0, pdp[i]) from `rng`.
pub fn draw_channel_with<T: Real, R: Rng + ?Sized>(
    pdp: &[f64],
    fft_len: usize,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    check_pdp(pdp)?;
    if pdp.len() > fft_len {
        return Err(Error::Domain(format!(
            "{} taps do not fit a {fft_len}-point transform",
            pdp.len()
        )));
    }
    let taps = pdp
        .iter()
        .map(|&v| cast_complex(complex_gaussian(rng, v)))
        .collect();
    Ok(ChannelRealization::with_pdp(taps, fft_len, pdp.to_vec()))
}

/// Seeded draw with `pdp.len()` taps and an `fft_len`-point response.
pub fn draw_channel<T: Real>(pdp: &[f64], fft_len: usize, seed: u64) -> Result<ChannelRealization<T>> {
    draw_channel_with(pdp, fft_len, &mut seed::rng(seed))
}

/// Draws until no bin falls into a deep fade. Returns the channel and the
/// number of rejected draws.
pub fn draw_channel_nonfading<T: Real, R: Rng + ?Sized>(
    pdp: &[f64],
    fft_len: usize,
    rng: &mut R,
) -> Result<(ChannelRealization<T>, usize)> {
    const MAX_REJECTIONS: usize = 1000;
    for rejected in 0..MAX_REJECTIONS {
        let ch = draw_channel_with(pdp, fft_len, rng)?;
        if ch.deep_fade().is_none() {
            return Ok((ch, rejected));
        }
    }
    Err(Error::Degenerate(format!(
        "{MAX_REJECTIONS} consecutive channel draws hit a deep fade"
    )))
}

/// Per-sample complex AWGN variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    n0: f64,
}

impl NoiseSpec {
    /// `n0 = 0` is accepted and disables noise.
    pub fn new(n0: f64) -> Result<Self> {
        if !(n0 >= 0.0) || !n0.is_finite() {
            return Err(Error::Domain(format!("noise density {n0} must be finite and non-negative")));
        }
        Ok(Self { n0 })
    }

    pub fn noiseless() -> Self {
        Self { n0: 0.0 }
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }
}

/// Passes one CP-prefixed block through the channel and adds noise.
///
/// The block is linearly convolved with the taps and truncated to its own
/// length, so after removing a prefix of at least `n_taps - 1` samples the
/// result is the circular convolution of the taps with the payload.
pub fn apply_channel_with<T: Real, R: Rng + ?Sized>(
    x_cp: &[Complex<T>],
    ch: &ChannelRealization<T>,
    noise: NoiseSpec,
    cp_len: usize,
    rng: &mut R,
) -> Result<Vec<Complex<T>>> {
    if cp_len + 1 < ch.n_taps() {
        return Err(Error::Domain(format!(
            "cyclic prefix of {cp_len} samples is shorter than the channel memory of {}",
            ch.n_taps() - 1
        )));
    }
    if cp_len > x_cp.len() {
        return Err(Error::Domain("block is shorter than its cyclic prefix".into()));
    }
    let h = ch.taps();
    let mut y: Vec<Complex<T>> = (0..x_cp.len())
        .map(|n| {
            h.iter()
                .take(n + 1)
                .enumerate()
                .fold(Complex::zero(), |acc, (i, hi)| acc + *hi * x_cp[n - i])
        })
        .collect();
    if noise.n0() > 0.0 {
        for v in y.iter_mut() {
            *v = *v + cast_complex(complex_gaussian(rng, noise.n0()));
        }
    }
    Ok(y)
}

pub fn apply_channel<T: Real>(
    x_cp: &[Complex<T>],
    ch: &ChannelRealization<T>,
    noise: NoiseSpec,
    cp_len: usize,
    seed: u64,
) -> Result<Vec<Complex<T>>> {
    apply_channel_with(x_cp, ch, noise, cp_len, &mut seed::rng(seed))
}

/// One-tap zero-forcing equalizer with planned transforms, reusable across
/// blocks of the same channel.
pub struct Equalizer<T: Real> {
    inv_h: Vec<Complex<T>>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> Equalizer<T> {
    pub fn new(ch: &ChannelRealization<T>) -> Result<Self> {
        if let Some((bin, magnitude)) = ch.deep_fade() {
            return Err(Error::DeepFade { bin, magnitude });
        }
        let len = ch.freq_response().len();
        let scale = T::one() / T::of_usize(len);
        let inv_h = ch.freq_response().iter().map(|h| h.inv() * scale).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            inv_h,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        })
    }

    /// u = IDFT(DFT(y) / H).
    pub fn equalize(&self, y: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if y.len() != self.inv_h.len() {
            return Err(Error::Domain(format!(
                "block of {} samples, equalizer built for {}",
                y.len(),
                self.inv_h.len()
            )));
        }
        let mut buf = y.to_vec();
        self.fwd.process(&mut buf);
        for (b, g) in buf.iter_mut().zip(&self.inv_h) {
            *b = *b * *g;
        }
        self.inv.process(&mut buf);
        Ok(buf)
    }
}

pub fn fde_equalize<T: Real>(y: &[Complex<T>], ch: &ChannelRealization<T>) -> Result<Vec<Complex<T>>> {
    Equalizer::new(ch)?.equalize(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{add_cp, remove_cp};

    fn random_block(len: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut rng = seed::rng(seed);
        (0..len).map(|_| complex_gaussian(&mut rng, 1.0)).collect()
    }

    #[test]
    fn exponential_profile_decays_to_a_tenth() {
        let p = exponential_pdp(10);
        assert_eq!(p.len(), 10);
        assert_eq!(p[0], 1.0);
        assert!((p[9] - 0.1).abs() < 1e-15);
        assert!(p.windows(2).all(|w| w[1] < w[0]));
        assert!((normalize_pdp(&p).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_tap_is_flat() {
        let ch = draw_channel::<f64>(&[1.0], 16, 5).unwrap();
        let m0 = ch.freq_response()[0].norm();
        assert!(ch.freq_response().iter().all(|h| (h.norm() - m0).abs() < 1e-14));
    }

    #[test]
    fn draws_are_reproducible() {
        let p = exponential_pdp(10);
        let a = draw_channel::<f64>(&p, 320, 99).unwrap();
        let b = draw_channel::<f64>(&p, 320, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, draw_channel::<f64>(&p, 320, 100).unwrap());
    }

    #[test]
    fn identity_channel() {
        let x = random_block(8, 1);
        let ch = ChannelRealization::from_taps(vec![Complex::new(1.0, 0.0)], 8).unwrap();
        let y = apply_channel(&x, &ch, NoiseSpec::noiseless(), 0, 0).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn one_sample_delay_rotates() {
        let x = random_block(8, 2);
        let ch = ChannelRealization::from_taps(vec![Complex::zero(), Complex::new(1.0, 0.0)], 8).unwrap();
        let y = apply_channel(&add_cp(&x, 2).unwrap(), &ch, NoiseSpec::noiseless(), 2, 0).unwrap();
        let y = remove_cp(&y, 2).unwrap();
        for n in 0..8 {
            assert_eq!(y[n], x[(n + 7) % 8]);
        }
    }

    #[test]
    fn short_prefix_is_rejected() {
        let ch = draw_channel::<f64>(&exponential_pdp(10), 64, 3).unwrap();
        let x = vec![Complex::zero(); 72];
        assert!(matches!(
            apply_channel(&x, &ch, NoiseSpec::noiseless(), 8, 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn circular_equivalence_in_frequency() {
        let n = 64;
        let ch = draw_channel::<f64>(&exponential_pdp(10), n, 4).unwrap();
        let x = random_block(n, 5);
        let y = apply_channel(&add_cp(&x, 10).unwrap(), &ch, NoiseSpec::noiseless(), 10, 0).unwrap();
        let mut yf = remove_cp(&y, 10).unwrap();
        let mut xf = x.clone();
        let fft = FftPlanner::new().plan_fft_forward(n);
        fft.process(&mut yf);
        fft.process(&mut xf);
        for p in 0..n {
            assert!((yf[p] - xf[p] * ch.freq_response()[p]).norm() < 1e-8);
        }
    }

    #[test]
    fn noiseless_equalizer_roundtrip() {
        let n = 320;
        let ch = draw_channel::<f64>(&exponential_pdp(10), n, 6).unwrap();
        let x = random_block(n, 7);
        let y = apply_channel(&add_cp(&x, 10).unwrap(), &ch, NoiseSpec::noiseless(), 10, 0).unwrap();
        let u = fde_equalize(&remove_cp(&y, 10).unwrap(), &ch).unwrap();
        for (a, b) in u.iter().zip(&x) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn flat_gain_divides_out() {
        let c = Complex::new(0.5, -2.0);
        let ch = ChannelRealization::from_taps(vec![c], 4).unwrap();
        let y = random_block(4, 8);
        let u = fde_equalize(&y, &ch).unwrap();
        for (a, b) in u.iter().zip(&y) {
            assert!((a - b / c).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_null_is_deep_fade() {
        // 1 + z^-1 vanishes at the Nyquist bin.
        let one = Complex::new(1.0, 0.0);
        let ch = ChannelRealization::<f64>::from_taps(vec![one, one], 4).unwrap();
        assert!(matches!(
            fde_equalize(&[Complex::zero(); 4], &ch),
            Err(Error::DeepFade { bin: 2, .. })
        ));
    }

    #[test]
    fn csv_export() {
        let ch = ChannelRealization::<f64>::from_taps(vec![Complex::new(1.0, 0.5)], 4).unwrap();
        let mut buf = Vec::new();
        ch.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("tap_index,re,im\n0,"));
    }

    #[test]
    fn single_precision_roundtrip() {
        let ch = draw_channel::<f32>(&exponential_pdp(4), 32, 10).unwrap();
        let x: Vec<Complex<f32>> = random_block(32, 11).into_iter().map(cast_complex).collect();
        let y = apply_channel(&add_cp(&x, 4).unwrap(), &ch, NoiseSpec::noiseless(), 4, 0).unwrap();
        let u = fde_equalize(&remove_cp(&y, 4).unwrap(), &ch).unwrap();
        for (a, b) in u.iter().zip(&x) {
            assert!((a - b).norm() < 1e-3);
        }
    }
}
