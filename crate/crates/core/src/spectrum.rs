//! Power spectra and adjacent-channel leakage.
//!
//! The analytic side treats each subsymbol pulse as a continuous-time
//! waveform, approximated by the prototype sampled `oversampling` times per
//! waveform sample. Sampling at the waveform rate alone would fold the
//! neighbouring channels back onto the occupied band and hide the leakage.
//!
//! All grids put a whole, even number of points in every subcarrier spacing
//! `1/T_s`, so subcarrier centres (integer multiples of `1/T_s`) and
//! adjacent-channel bin edges land exactly on grid points.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::channel::{complex_gaussian, exponential_pdp};
use crate::config::GfdmConfig;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::seed;
use crate::waveform::{PowerAllocation, PrototypeFilter};

/// Oversampling used for leakage integrals.
pub const ACI_OVERSAMPLING: usize = 16;
/// Default grid density, points per subcarrier spacing.
pub const DEFAULT_POINTS_PER_SUBCARRIER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdKind {
    Analytic,
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    freqs: Vec<f64>,
    values: Vec<f64>,
    kind: PsdKind,
}

impl SpectralDensity {
    pub fn new(freqs: Vec<f64>, values: Vec<f64>, kind: PsdKind) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::Domain("frequency and value grids differ in length".into()));
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("frequency grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain("spectral density must be non-negative".into()));
        }
        Ok(Self { freqs, values, kind })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> PsdKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Trapezoidal integral over the whole grid.
    pub fn integral(&self) -> f64 {
        self.freqs
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(f, v)| 0.5 * (f[1] - f[0]) * (v[0] + v[1]))
            .sum()
    }

    /// Riemann sum, exact for periodogram bins covering a full period.
    pub fn bin_sum(&self) -> f64 {
        if self.freqs.len() < 2 {
            return 0.0;
        }
        (self.freqs[1] - self.freqs[0]) * self.values.iter().sum::<f64>()
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, f: f64) -> f64 {
        match self.freqs.binary_search_by(|x| x.total_cmp(&f)) {
            Ok(i) => self.values[i],
            Err(0) => 0.0,
            Err(i) if i >= self.freqs.len() => 0.0,
            Err(i) => {
                let (f0, f1) = (self.freqs[i - 1], self.freqs[i]);
                let w = (f - f0) / (f1 - f0);
                self.values[i - 1] * (1.0 - w) + self.values[i] * w
            }
        }
    }

    /// Mean value over consecutive groups of `width` grid points, returned
    /// as (group centre frequency, mean).
    pub fn cell_means(&self, width: usize) -> Vec<(f64, f64)> {
        self.freqs
            .chunks_exact(width.max(1))
            .zip(self.values.chunks_exact(width.max(1)))
            .map(|(f, v)| {
                (
                    f.iter().sum::<f64>() / f.len() as f64,
                    v.iter().sum::<f64>() / v.len() as f64,
                )
            })
            .collect()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq_hz,psd_db")?;
        for (f, v) in self.freqs.iter().zip(&self.values) {
            writeln!(w, "{f:.6e},{:.6}", 10.0 * v.log10())?;
        }
        Ok(())
    }
}

/// S_GG(f) = sum_m |G_m(f)|^2 on a uniform grid in natural transform order.
#[derive(Debug, Clone)]
pub struct FilterSpectrum {
    subcarriers: usize,
    symbol_duration: f64,
    oversampling: usize,
    points: usize,
    values: Arc<Vec<f64>>,
}

impl FilterSpectrum {
    /// `points` per subcarrier spacing must be even and at least M so the
    /// zero-padded transform holds the whole frame.
    pub fn new(config: &GfdmConfig, oversampling: usize, points: usize) -> Result<Self> {
        config.validate()?;
        if points % 2 != 0 || points < config.subsymbols {
            return Err(Error::Config(format!(
                "grid density {points} must be even and at least M = {}",
                config.subsymbols
            )));
        }
        let filter = PrototypeFilter::<f64>::oversampled(config, oversampling)?;
        let k = config.subcarriers;
        let nfft = oversampling * k * points;
        let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
        // G_m(f) = (T/L) sum_n g_m[n] exp(-j 2 pi f n T/L), T = T_s/K.
        let dt = config.symbol_duration / (k * oversampling) as f64;
        let mut values = vec![0.0; nfft];
        let mut buf = vec![Complex::<f64>::zero(); nfft];
        for m in 0..config.subsymbols {
            buf.iter_mut().for_each(|z| *z = Complex::zero());
            for (z, g) in buf.iter_mut().zip(filter.circular_shift(m * k * oversampling)) {
                z.re = g;
            }
            fft.process(&mut buf);
            for (v, z) in values.iter_mut().zip(&buf) {
                *v += dt * dt * z.norm_sqr();
            }
        }
        Ok(Self {
            subcarriers: k,
            symbol_duration: config.symbol_duration,
            oversampling,
            points,
            values: Arc::new(values),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn points_per_subcarrier(&self) -> usize {
        self.points
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    /// Grid spacing in Hz.
    pub fn step(&self) -> f64 {
        1.0 / (self.points as f64 * self.symbol_duration)
    }

    /// S_GG at `i` grid steps from DC, periodic in the transform length.
    #[inline]
    pub fn at(&self, i: i64) -> f64 {
        self.values[i.rem_euclid(self.values.len() as i64) as usize]
    }

    /// Integral of S_GG over [(d - 1/2)/T_s, (d + 1/2)/T_s] by the composite
    /// trapezoid rule on the grid.
    pub fn unit_band_integral(&self, d: i64) -> f64 {
        let p = self.points as i64;
        let lo = d * p - p / 2;
        let hi = lo + p;
        let inner: f64 = (lo + 1..hi).map(|i| self.at(i)).sum();
        self.step() * (inner + 0.5 * (self.at(lo) + self.at(hi)))
    }

    /// Grid offset of subcarrier `k`'s centre, (k - floor(K/2)) * points.
    fn centre_offset(&self, k: usize) -> i64 {
        (k as i64 - (self.subcarriers / 2) as i64) * self.points as i64
    }
}

/// Analytic PSD S_xx(f) = p_s / (M T_s) sum_k alpha_k S_GG(f - f_k).
#[derive(Debug, Clone)]
pub struct PsdModel {
    spectrum: FilterSpectrum,
    scale: f64,
}

impl PsdModel {
    pub fn new(config: &GfdmConfig, oversampling: usize, points: usize) -> Result<Self> {
        let spectrum = FilterSpectrum::new(config, oversampling, points)?;
        let scale = config.mean_symbol_power() / (config.subsymbols as f64 * config.symbol_duration);
        Ok(Self { spectrum, scale })
    }

    pub fn filter_spectrum(&self) -> &FilterSpectrum {
        &self.spectrum
    }

    /// Value at grid index `i` (steps from DC).
    pub fn at(&self, alloc: &PowerAllocation, i: i64) -> f64 {
        let s = &self.spectrum;
        self.scale
            * alloc
                .alphas()
                .iter()
                .enumerate()
                .filter(|(_, a)| **a != 0.0)
                .map(|(k, a)| a * s.at(i - s.centre_offset(k)))
                .sum::<f64>()
    }

    /// PSD over one full period of the grid, centred on DC.
    pub fn psd(&self, alloc: &PowerAllocation) -> Result<SpectralDensity> {
        self.check(alloc)?;
        let n = self.spectrum.len() as i64;
        let step = self.spectrum.step();
        let idx: Vec<i64> = (-n / 2..n - n / 2).collect();
        let freqs = idx.iter().map(|&i| i as f64 * step).collect();
        let values = idx.iter().map(|&i| self.at(alloc, i)).collect();
        SpectralDensity::new(freqs, values, PsdKind::Analytic)
    }

    /// PSD at arbitrary frequencies by linear interpolation of S_GG.
    pub fn evaluate(&self, alloc: &PowerAllocation, freqs: &[f64]) -> Result<SpectralDensity> {
        self.check(alloc)?;
        let step = self.spectrum.step();
        let values = freqs
            .iter()
            .map(|&f| {
                let x = f / step;
                let i0 = x.floor();
                let w = x - i0;
                let i0 = i0 as i64;
                self.at(alloc, i0) * (1.0 - w) + self.at(alloc, i0 + 1) * w
            })
            .collect();
        SpectralDensity::new(freqs.to_vec(), values, PsdKind::Analytic)
    }

    fn check(&self, alloc: &PowerAllocation) -> Result<()> {
        if alloc.len() != self.spectrum.subcarriers {
            return Err(Error::Domain(format!(
                "allocation has {} entries, expected {}",
                alloc.len(),
                self.spectrum.subcarriers
            )));
        }
        Ok(())
    }
}

/// Analytic PSD on the default grid of an `oversampling`-times oversampled
/// waveform.
pub fn analytic_psd(config: &GfdmConfig, alloc: &PowerAllocation, oversampling: usize) -> Result<SpectralDensity> {
    let points = DEFAULT_POINTS_PER_SUBCARRIER.max(config.subsymbols + config.subsymbols % 2);
    PsdModel::new(config, oversampling, points)?.psd(alloc)
}

/// Periodic Hann window.
pub fn hann<T: Real>(len: usize) -> Vec<T> {
    let two_pi = 2.0 * std::f64::consts::PI;
    (0..len)
        .map(|n| T::of(0.5 - 0.5 * (two_pi * n as f64 / len as f64).cos()))
        .collect()
}

/// Streaming Welch estimator: Hann-windowed segments of `nfft` samples
/// advanced by `nfft - overlap`, periodograms averaged.
pub struct WelchEstimator<T: Real> {
    nfft: usize,
    hop: usize,
    sample_rate: f64,
    window: Vec<T>,
    window_power: f64,
    fft: Arc<dyn Fft<T>>,
    pending: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
    acc: Vec<f64>,
    segments: usize,
}

impl<T: Real> WelchEstimator<T> {
    pub fn new(nfft: usize, overlap: usize, sample_rate: f64) -> Result<Self> {
        if nfft < 2 || overlap >= nfft {
            return Err(Error::Domain(format!(
                "segment length {nfft} with overlap {overlap} is invalid"
            )));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::Domain("sample rate must be positive".into()));
        }
        let window = hann::<T>(nfft);
        let window_power = window.iter().map(|w| w.to_f64_lossy().powi(2)).sum();
        Ok(Self {
            nfft,
            hop: nfft - overlap,
            sample_rate,
            window,
            window_power,
            fft: FftPlanner::new().plan_fft_forward(nfft),
            pending: Vec::with_capacity(2 * nfft),
            scratch: vec![Complex::zero(); nfft],
            acc: vec![0.0; nfft],
            segments: 0,
        })
    }

    /// Half-overlapping segments, the usual averaged periodogram setup.
    pub fn half_overlap(nfft: usize, sample_rate: f64) -> Result<Self> {
        Self::new(nfft, nfft / 2, sample_rate)
    }

    pub fn push(&mut self, samples: &[Complex<T>]) {
        self.pending.extend_from_slice(samples);
        let mut start = 0;
        while start + self.nfft <= self.pending.len() {
            for ((s, x), w) in self
                .scratch
                .iter_mut()
                .zip(&self.pending[start..start + self.nfft])
                .zip(&self.window)
            {
                *s = *x * *w;
            }
            self.fft.process(&mut self.scratch);
            for (a, z) in self.acc.iter_mut().zip(&self.scratch) {
                *a += z.norm_sqr().to_f64_lossy();
            }
            self.segments += 1;
            start += self.hop;
        }
        self.pending.drain(..start);
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Two-sided density in W/Hz, centred on DC.
    pub fn finish(&self) -> Result<SpectralDensity> {
        if self.segments == 0 {
            return Err(Error::Domain(format!(
                "need at least {} samples for one segment",
                self.nfft
            )));
        }
        let norm = 1.0 / (self.segments as f64 * self.sample_rate * self.window_power);
        let n = self.nfft as i64;
        let df = self.sample_rate / self.nfft as f64;
        let idx: Vec<i64> = (-n / 2..n - n / 2).collect();
        let freqs = idx.iter().map(|&i| i as f64 * df).collect();
        let values = idx
            .iter()
            .map(|&i| self.acc[i.rem_euclid(n) as usize] * norm)
            .collect();
        SpectralDensity::new(freqs, values, PsdKind::Estimated)
    }
}

/// Averaged periodogram of a sample buffer.
pub fn estimate_psd<T: Real>(
    samples: &[Complex<T>],
    sample_rate: f64,
    nfft: usize,
    overlap: usize,
) -> Result<SpectralDensity> {
    let mut est = WelchEstimator::new(nfft, overlap, sample_rate)?;
    est.push(samples);
    est.finish()
}

/// Power gains of the two neighbouring primary users at the K bin centres
/// of their channels. Bin `j = 0` of either side is the one next to the
/// secondary band.
#[derive(Debug, Clone, PartialEq)]
pub struct PuGainProfile {
    pub right: Vec<f64>,
    pub left: Vec<f64>,
}

impl PuGainProfile {
    pub fn flat(subcarriers: usize, gain: f64) -> Self {
        Self {
            right: vec![gain; subcarriers],
            left: vec![gain; subcarriers],
        }
    }

    pub fn mirrored(gains: Vec<f64>) -> Self {
        Self {
            left: gains.clone(),
            right: gains,
        }
    }
}

/// |H(nu)|^2 of a tapped delay line at the K bin centres of a band of K
/// subcarriers, nu_j = (j - (K-1)/2) / K cycles per sample.
pub fn bin_centre_gains(taps: &[Complex<f64>], subcarriers: usize) -> Vec<f64> {
    let k = subcarriers as f64;
    (0..subcarriers)
        .map(|j| {
            let nu = (j as f64 - (k - 1.0) / 2.0) / k;
            let h: Complex<f64> = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * nu * i as f64))
                .sum();
            h.norm_sqr()
        })
        .collect()
}

pub fn draw_pu_gains_with<R: Rng + ?Sized>(pdp: &[f64], subcarriers: usize, rng: &mut R) -> Result<PuGainProfile> {
    if pdp.is_empty() || pdp.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Domain("power delay profile must be non-empty and positive".into()));
    }
    let mut draw = || -> Vec<f64> {
        let taps: Vec<Complex<f64>> = pdp.iter().map(|&v| complex_gaussian(rng, v)).collect();
        bin_centre_gains(&taps, subcarriers)
    };
    let right = draw();
    let left = draw();
    Ok(PuGainProfile { right, left })
}

/// Two independent frequency-selective PU channels.
pub fn draw_pu_gains(pdp: &[f64], subcarriers: usize, seed: u64) -> Result<PuGainProfile> {
    draw_pu_gains_with(pdp, subcarriers, &mut seed::rng(seed))
}

/// Same as [`draw_pu_gains`] with the default ten-tap exponential profile.
pub fn draw_default_pu_gains(subcarriers: usize, seed: u64) -> Result<PuGainProfile> {
    draw_pu_gains(&exponential_pdp(10), subcarriers, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AciCoefficients {
    pub t_right: Vec<f64>,
    pub t_left: Vec<f64>,
}

impl AciCoefficients {
    pub fn len(&self) -> usize {
        self.t_right.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_right.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,t_right,t_left")?;
        for (k, (r, l)) in self.t_right.iter().zip(&self.t_left).enumerate() {
            writeln!(w, "{k},{r:.12e},{l:.12e}")?;
        }
        Ok(())
    }
}

/// (P_r, P_l) = (sum alpha_k T_r(k), sum alpha_k T_l(k)).
pub fn aci_power(coeffs: &AciCoefficients, alloc: &PowerAllocation) -> (f64, f64) {
    let dot = |t: &[f64]| t.iter().zip(alloc.alphas()).map(|(a, b)| a * b).sum::<f64>();
    (dot(&coeffs.t_right), dot(&coeffs.t_left))
}

/// Leakage integrals of every subcarrier into every adjacent-channel bin.
///
/// The right neighbour spans [K/(2T_s), 3K/(2T_s)] and is cut into K bins of
/// width 1/T_s; the left neighbour is its mirror image. Entry (k, j) of the
/// right matrix is p_s/(M T_s) times the integral of S_GG(f - f_k) over bin
/// j, so T_r = I_r H_r for any gain profile.
#[derive(Debug, Clone)]
pub struct AciModel {
    subcarriers: usize,
    right: Vec<f64>,
    left: Vec<f64>,
    points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AciOptions {
    pub oversampling: usize,
    pub initial_points: usize,
    /// Stop refining once the integrals move by less than this fraction.
    pub tolerance: f64,
    pub max_refinements: usize,
}

impl Default for AciOptions {
    fn default() -> Self {
        Self {
            oversampling: ACI_OVERSAMPLING,
            initial_points: DEFAULT_POINTS_PER_SUBCARRIER,
            tolerance: 1e-3,
            max_refinements: 3,
        }
    }
}

impl AciModel {
    pub fn new(config: &GfdmConfig) -> Result<Self> {
        Self::with_options(config, AciOptions::default())
    }

    pub fn with_options(config: &GfdmConfig, opts: AciOptions) -> Result<Self> {
        let k = config.subcarriers as i64;
        let mut points = opts.initial_points.max(config.subsymbols);
        points += points % 2;
        let scale = config.mean_symbol_power() / (config.subsymbols as f64 * config.symbol_duration);
        // Unit-band integrals for centre offsets -(2K-1) ..= 2K-1.
        let integrals = |points: usize| -> Result<Vec<f64>> {
            let s = FilterSpectrum::new(config, opts.oversampling, points)?;
            Ok((-(2 * k - 1)..=(2 * k - 1)).map(|d| s.unit_band_integral(d)).collect())
        };
        let mut current = integrals(points)?;
        for _ in 0..opts.max_refinements {
            let finer = integrals(2 * points)?;
            points *= 2;
            let total: f64 = finer.iter().sum();
            let change: f64 = finer.iter().zip(&current).map(|(a, b)| (a - b).abs()).sum();
            current = finer;
            if change <= opts.tolerance * total {
                break;
            }
        }
        let j_at = |d: i64| current[(d + 2 * k - 1) as usize];
        let ku = config.subcarriers;
        let mut right = Vec::with_capacity(ku * ku);
        let mut left = Vec::with_capacity(ku * ku);
        for kk in 0..k {
            for j in 0..k {
                // Right bin j is centred K + j - k subcarrier spacings above
                // f_k, left bin j the same distance below -f_k mirrored.
                right.push(scale * j_at(k + j - kk));
                left.push(scale * j_at(-(j + kk + 1)));
            }
        }
        Ok(Self {
            subcarriers: ku,
            right,
            left,
            points,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// Grid density the integrals settled at.
    pub fn points_per_subcarrier(&self) -> usize {
        self.points
    }

    /// Leakage of subcarrier k into right bin j per unit power and gain.
    pub fn right_weight(&self, k: usize, j: usize) -> f64 {
        self.right[k * self.subcarriers + j]
    }

    pub fn left_weight(&self, k: usize, j: usize) -> f64 {
        self.left[k * self.subcarriers + j]
    }

    pub fn coefficients(&self, gains: &PuGainProfile) -> Result<AciCoefficients> {
        let k = self.subcarriers;
        if gains.right.len() != k || gains.left.len() != k {
            return Err(Error::Domain(format!("gain profile must have {k} bins per side")));
        }
        let apply = |m: &[f64], h: &[f64]| -> Vec<f64> {
            m.chunks_exact(k)
                .map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum())
                .collect()
        };
        Ok(AciCoefficients {
            t_right: apply(&self.right, &gains.right),
            t_left: apply(&self.left, &gains.left),
        })
    }
}

pub fn aci_coefficients(config: &GfdmConfig, gains: &PuGainProfile) -> Result<AciCoefficients> {
    AciModel::new(config)?.coefficients(gains)
}
