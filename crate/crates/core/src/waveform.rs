//! GFDM transmitter and linear receivers.
//!
//! A frame carries `M` subsymbols on each of `K` subcarriers. Symbols are laid
//! out time-slot major: entry `m*K + k` of a [`SymbolFrame`] is subsymbol `m`
//! on subcarrier `k`, and column `m*K + k` of the [`ModulationMatrix`] is the
//! corresponding basis pulse
//!
//! ```text
//! a_{m,k}[n] = g[(n - mK) mod MK] * exp(j 2 pi n (k - floor(K/2)) / K)
//! ```
//!
//! The offset places the occupied band around DC; it is an integer so the
//! exponential is periodic in the frame and the matrix stays block
//! circulant.

use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use rustfft::{Fft, FftPlanner};

use crate::config::{FilterKind, GfdmConfig};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::num::{cis, Real};

/// Reciprocal condition number below which zero-forcing is refused.
pub const ZF_RCOND_FLOOR: f64 = 1e-12;

/// Raised-cosine impulse response at `t` subsymbol durations.
pub fn raised_cosine(t: f64, rolloff: f64) -> f64 {
    let sinc = |x: f64| {
        if x == 0.0 {
            1.0
        } else {
            let px = std::f64::consts::PI * x;
            px.sin() / px
        }
    };
    if rolloff > 0.0 {
        let d = 2.0 * rolloff * t;
        if (d.abs() - 1.0).abs() < 1e-12 {
            return std::f64::consts::FRAC_PI_4 * sinc(1.0 / (2.0 * rolloff));
        }
        sinc(t) * (std::f64::consts::PI * rolloff * t).cos() / (1.0 - d * d)
    } else {
        sinc(t)
    }
}

/// Real prototype pulse spanning one frame, peak at sample 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter<T> {
    taps: Vec<T>,
    oversampling: usize,
}

impl<T: Real> PrototypeFilter<T> {
    /// Pulse sampled at the waveform rate, `MK` taps, unit energy.
    pub fn build(config: &GfdmConfig) -> Result<Self> {
        Self::oversampled(config, 1)
    }

    /// Pulse sampled `factor` times faster than the waveform rate, giving
    /// `factor * MK` taps. The taps at multiples of `factor` coincide with
    /// [`PrototypeFilter::build`], so the energy is `factor` rather than one.
    pub fn oversampled(config: &GfdmConfig, factor: usize) -> Result<Self> {
        config.validate()?;
        if factor == 0 {
            return Err(Error::Config("oversampling factor must be positive".into()));
        }
        let n = config.frame_len();
        let k = config.subcarriers as f64;
        let taps64: Vec<f64> = match config.filter {
            FilterKind::Rectangular => vec![1.0 / (n as f64).sqrt(); n * factor],
            FilterKind::RaisedCosine => {
                let centred = |i: usize, len: usize| -> f64 {
                    let tau = ((i + len / 2) % len) as f64 - (len / 2) as f64;
                    tau
                };
                let norm = (0..n)
                    .map(|i| raised_cosine(centred(i, n) / k, config.rolloff).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let len = n * factor;
                let step = k * factor as f64;
                (0..len)
                    .map(|i| raised_cosine(centred(i, len) / step, config.rolloff) / norm)
                    .collect()
            }
        };
        Ok(Self {
            taps: taps64.into_iter().map(T::of).collect(),
            oversampling: factor,
        })
    }

    pub fn from_taps(taps: Vec<T>) -> Self {
        Self {
            taps,
            oversampling: 1,
        }
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    pub fn energy(&self) -> T {
        self.taps.iter().map(|&g| g * g).sum()
    }

    /// g[(n - shift) mod len] for every n.
    pub fn circular_shift(&self, shift: usize) -> Vec<T> {
        let len = self.taps.len();
        (0..len)
            .map(|n| self.taps[(n + len - shift % len) % len])
            .collect()
    }
}

/// Per-subcarrier linear transmit powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    alphas: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if let Some((k, a)) = alphas
            .iter()
            .enumerate()
            .find(|(_, a)| !(**a >= 0.0) || !a.is_finite())
        {
            return Err(Error::Domain(format!("alpha[{k}] = {a} is not a finite non-negative power")));
        }
        Ok(Self { alphas })
    }

    pub fn uniform(subcarriers: usize, alpha: f64) -> Result<Self> {
        Self::new(vec![alpha; subcarriers])
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.alphas.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.alphas.iter().map(|a| a * factor).collect())
    }
}

/// One frame of data symbols, time-slot major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame<T> {
    subcarriers: usize,
    symbols: Vec<Complex<T>>,
}

impl<T: Real> SymbolFrame<T> {
    pub fn new(subcarriers: usize, symbols: Vec<Complex<T>>) -> Result<Self> {
        if subcarriers == 0 || symbols.len() % subcarriers != 0 {
            return Err(Error::Domain(format!(
                "{} symbols do not fill whole subsymbols of {subcarriers} subcarriers",
                symbols.len()
            )));
        }
        Ok(Self {
            subcarriers,
            symbols,
        })
    }

    pub fn symbols(&self) -> &[Complex<T>] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<Complex<T>> {
        self.symbols
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn subsymbols(&self) -> usize {
        self.symbols.len() / self.subcarriers
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize) -> Complex<T> {
        self.symbols[m * self.subcarriers + k]
    }
}

/// The MK x MK matrix A with x = A s.
#[derive(Debug, Clone)]
pub struct ModulationMatrix<T> {
    subcarriers: usize,
    subsymbols: usize,
    matrix: CMatrix<T>,
}

impl<T: Real> ModulationMatrix<T> {
    pub fn build(config: &GfdmConfig, filter: &PrototypeFilter<T>) -> Result<Self> {
        config.validate()?;
        let n = config.frame_len();
        if filter.len() != n {
            return Err(Error::Domain(format!(
                "filter has {} taps, frame needs {n}",
                filter.len()
            )));
        }
        let k_count = config.subcarriers;
        let shifted: Vec<Vec<T>> = (0..config.subsymbols)
            .map(|m| filter.circular_shift(m * k_count))
            .collect();
        let two_pi = T::of(2.0 * std::f64::consts::PI);
        let kk = T::of_usize(k_count);
        let matrix = CMatrix::from_fn(n, n, |row, col| {
            let (m, k) = (col / k_count, col % k_count);
            let offset = T::of(config.subcarrier_offset(k) as f64);
            // Reduce n*(k - c) modulo K before scaling to keep the phase small.
            let cycles = (T::of_usize(row) * offset) % kk;
            cis(two_pi * cycles / kk) * shifted[m][row]
        });
        Ok(Self {
            subcarriers: k_count,
            subsymbols: config.subsymbols,
            matrix,
        })
    }

    pub fn column_index(&self, m: usize, k: usize) -> usize {
        m * self.subcarriers + k
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn subsymbols(&self) -> usize {
        self.subsymbols
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

/// x = A (sqrt(alpha) .* s).
pub fn modulate<T: Real>(
    frame: &SymbolFrame<T>,
    alloc: &PowerAllocation,
    a: &ModulationMatrix<T>,
) -> Result<Vec<Complex<T>>> {
    let scaled = scale_symbols(frame, alloc, a.subcarriers(), a.dim())?;
    Ok(a.matrix().mul_vec(&scaled))
}

fn scale_symbols<T: Real>(
    frame: &SymbolFrame<T>,
    alloc: &PowerAllocation,
    subcarriers: usize,
    dim: usize,
) -> Result<Vec<Complex<T>>> {
    if frame.symbols().len() != dim || frame.subcarriers() != subcarriers {
        return Err(Error::Domain(format!(
            "frame of {} symbols does not match a {dim}-sample block",
            frame.symbols().len()
        )));
    }
    if alloc.len() != subcarriers {
        return Err(Error::Domain(format!(
            "allocation has {} entries, expected {subcarriers}",
            alloc.len()
        )));
    }
    let amps: Vec<T> = alloc.alphas().iter().map(|a| T::of(a.sqrt())).collect();
    Ok(frame
        .symbols()
        .iter()
        .enumerate()
        .map(|(i, s)| *s * amps[i % subcarriers])
        .collect())
}

/// Prepends the last `cp_len` samples.
pub fn add_cp<T: Real>(x: &[Complex<T>], cp_len: usize) -> Result<Vec<Complex<T>>> {
    if cp_len > x.len() {
        return Err(Error::Domain(format!(
            "cyclic prefix of {cp_len} exceeds block length {}",
            x.len()
        )));
    }
    let mut out = Vec::with_capacity(x.len() + cp_len);
    out.extend_from_slice(&x[x.len() - cp_len..]);
    out.extend_from_slice(x);
    Ok(out)
}

/// Drops the first `cp_len` samples.
pub fn remove_cp<T: Real>(y: &[Complex<T>], cp_len: usize) -> Result<Vec<Complex<T>>> {
    if cp_len > y.len() {
        return Err(Error::Domain(format!(
            "cyclic prefix of {cp_len} exceeds received length {}",
            y.len()
        )));
    }
    Ok(y[cp_len..].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceiverKind {
    MatchedFilter,
    ZeroForcing,
}

impl ReceiverKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::MatchedFilter => "mf",
            Self::ZeroForcing => "zf",
        }
    }
}

/// Linear receiver B with s_hat = B u.
#[derive(Debug, Clone)]
pub struct ReceiverMatrix<T> {
    kind: ReceiverKind,
    subcarriers: usize,
    matrix: CMatrix<T>,
    rcond: Option<f64>,
}

impl<T: Real> ReceiverMatrix<T> {
    /// A^H for the matched filter, A^-1 for zero forcing.
    pub fn build(a: &ModulationMatrix<T>, kind: ReceiverKind) -> Result<Self> {
        let (matrix, rcond) = match kind {
            ReceiverKind::MatchedFilter => (a.matrix().adjoint(), None),
            ReceiverKind::ZeroForcing => {
                let (inv, rcond) = a.matrix().inverse(ZF_RCOND_FLOOR)?;
                (inv, Some(rcond))
            }
        };
        Ok(Self {
            kind,
            subcarriers: a.subcarriers(),
            matrix,
            rcond,
        })
    }

    pub fn kind(&self) -> ReceiverKind {
        self.kind
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Reciprocal 1-norm condition of A, known only for zero forcing.
    pub fn rcond(&self) -> Option<f64> {
        self.rcond
    }

    /// Row of B producing symbol (m, k).
    pub fn row(&self, m: usize, k: usize) -> &[Complex<T>] {
        self.matrix.row(m * self.subcarriers + k)
    }
}

/// s_hat[m,k] = (B u)[m,k] / sqrt(alpha_k).
pub fn demodulate<T: Real>(
    u: &[Complex<T>],
    b: &ReceiverMatrix<T>,
    alloc: &PowerAllocation,
) -> Result<SymbolFrame<T>> {
    if u.len() != b.dim() {
        return Err(Error::Domain(format!(
            "received block of {} samples, receiver expects {}",
            u.len(),
            b.dim()
        )));
    }
    if alloc.len() != b.subcarriers() {
        return Err(Error::Domain("allocation length does not match receiver".into()));
    }
    if let Some(k) = alloc.alphas().iter().position(|&a| a == 0.0) {
        return Err(Error::Domain(format!(
            "subcarrier {k} carries no power and cannot be demodulated"
        )));
    }
    let inv_amp: Vec<T> = alloc.alphas().iter().map(|a| T::of(1.0 / a.sqrt())).collect();
    let k_count = b.subcarriers();
    let est = b
        .matrix()
        .mul_vec(u)
        .into_iter()
        .enumerate()
        .map(|(i, z)| z * inv_amp[i % k_count])
        .collect();
    SymbolFrame::new(k_count, est)
}

/// Transmitter running on a sample grid `factor` times finer than the
/// waveform rate, used to observe the spectrum beyond the occupied band.
///
/// Each subsymbol's subcarrier sum is one inverse FFT of length `factor * K`,
/// so a frame costs `M` FFTs plus `M * factor * MK` multiplies.
pub struct OversampledSynthesizer<T: Real> {
    subcarriers: usize,
    subsymbols: usize,
    factor: usize,
    shifted: Vec<Vec<T>>,
    phase: Vec<Complex<T>>,
    ifft: Arc<dyn Fft<T>>,
}

impl<T: Real> OversampledSynthesizer<T> {
    pub fn new(config: &GfdmConfig, factor: usize) -> Result<Self> {
        let filter = PrototypeFilter::<T>::oversampled(config, factor)?;
        let k_count = config.subcarriers;
        let shifted = (0..config.subsymbols)
            .map(|m| filter.circular_shift(m * k_count * factor))
            .collect();
        let period = T::of_usize(k_count * factor);
        let half = T::of_usize(k_count / 2);
        let two_pi = T::of(2.0 * std::f64::consts::PI);
        let len = filter.len();
        let phase = (0..len)
            .map(|n| {
                let cycles = (T::of_usize(n) * half) % period;
                cis(-two_pi * cycles / period)
            })
            .collect();
        let ifft = FftPlanner::new().plan_fft_inverse(k_count * factor);
        Ok(Self {
            subcarriers: k_count,
            subsymbols: config.subsymbols,
            factor,
            shifted,
            phase,
            ifft,
        })
    }

    pub fn block_len(&self) -> usize {
        self.subcarriers * self.subsymbols * self.factor
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    /// Appends one oversampled frame to `out`.
    pub fn synthesize_into(
        &self,
        frame: &SymbolFrame<T>,
        alloc: &PowerAllocation,
        out: &mut Vec<Complex<T>>,
    ) -> Result<()> {
        let scaled = scale_symbols(frame, alloc, self.subcarriers, self.subcarriers * self.subsymbols)?;
        let period = self.subcarriers * self.factor;
        let len = self.block_len();
        let mut acc = vec![Complex::<T>::zero(); len];
        let mut buf = vec![Complex::<T>::zero(); period];
        for (m, g) in self.shifted.iter().enumerate() {
            buf.iter_mut().for_each(|z| *z = Complex::zero());
            buf[..self.subcarriers]
                .copy_from_slice(&scaled[m * self.subcarriers..(m + 1) * self.subcarriers]);
            self.ifft.process(&mut buf);
            for (n, a) in acc.iter_mut().enumerate() {
                let gn = g[n];
                if gn != T::zero() {
                    *a = *a + buf[n % period] * gn;
                }
            }
        }
        out.extend(acc.iter().zip(&self.phase).map(|(a, p)| *a * *p));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::qam::Qam;

    fn random_frame(config: &GfdmConfig, seed: u64) -> SymbolFrame<f64> {
        let qam = Qam::new(config.qam_bits).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let syms = (0..config.frame_len()).map(|_| qam.random_symbol(&mut rng)).collect();
        SymbolFrame::new(config.subcarriers, syms).unwrap()
    }

    fn small(k: usize, m: usize, filter: FilterKind) -> GfdmConfig {
        GfdmConfig {
            subcarriers: k,
            subsymbols: m,
            cp_len: 0,
            qam_bits: 4,
            rolloff: 0.15,
            symbol_duration: 1.0,
            filter,
        }
    }

    #[test]
    fn rc_filter_reference_lengths() {
        let f5 = PrototypeFilter::<f64>::build(&GfdmConfig::reference(5)).unwrap();
        assert_eq!(f5.len(), 320);
        assert!((f5.energy() - 1.0).abs() < 1e-12);
        let f15 = PrototypeFilter::<f64>::build(&GfdmConfig::reference(15)).unwrap();
        assert_eq!(f15.len(), 960);
        assert!((f15.energy() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rc_filter_peaks_at_zero_and_is_symmetric() {
        let f = PrototypeFilter::<f64>::build(&GfdmConfig::reference(5)).unwrap();
        let t = f.taps();
        let peak = t.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(t[0], peak);
        for n in 1..t.len() {
            assert!((t[n] - t[t.len() - n]).abs() < 1e-15);
        }
        // Nyquist zero crossings at multiples of K samples.
        assert!(t[64].abs() < 1e-12 && t[128].abs() < 1e-12);
    }

    #[test]
    fn rectangular_ofdm_taps() {
        let f = PrototypeFilter::<f64>::build(&small(4, 1, FilterKind::Rectangular)).unwrap();
        assert_eq!(f.taps(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn bad_rolloff_is_config_error() {
        let mut c = GfdmConfig::reference(5);
        c.rolloff = 1.2;
        assert!(matches!(PrototypeFilter::<f64>::build(&c), Err(Error::Config(_))));
    }

    #[test]
    fn oversampled_filter_matches_on_coarse_grid() {
        let c = GfdmConfig::reference(5);
        let f = PrototypeFilter::<f64>::build(&c).unwrap();
        let fo = PrototypeFilter::<f64>::oversampled(&c, 8).unwrap();
        for (n, g) in f.taps().iter().enumerate() {
            assert!((fo.taps()[8 * n] - g).abs() < 1e-15);
        }
        assert!((fo.energy() / 8.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn columns_have_unit_norm() {
        let c = small(4, 3, FilterKind::RaisedCosine);
        let f = PrototypeFilter::<f64>::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        for col in 0..12 {
            let norm: f64 = a.matrix().column(col).iter().map(|z| z.norm_sqr()).sum();
            assert!((norm.sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ofdm_matrix_is_unitary() {
        let c = small(4, 1, FilterKind::Rectangular);
        let f = PrototypeFilter::<f64>::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let gram = a.matrix().adjoint().matmul(a.matrix());
        assert!(gram.max_abs_dev_from_identity() < 1e-10);
        let mf = ReceiverMatrix::build(&a, ReceiverKind::MatchedFilter).unwrap();
        let zf = ReceiverMatrix::build(&a, ReceiverKind::ZeroForcing).unwrap();
        assert!(mf.matrix().max_abs_diff(zf.matrix()) < 1e-10);
    }

    #[test]
    fn reference_matrix_inverts() {
        let c = GfdmConfig::reference(5);
        let f = PrototypeFilter::<f64>::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let zf = ReceiverMatrix::build(&a, ReceiverKind::ZeroForcing).unwrap();
        let resid = zf.matrix().matmul(a.matrix()).max_abs_dev_from_identity();
        assert!(resid <= 1e-8, "residual {resid}");
        assert!(zf.rcond().unwrap() > 1e-6);
    }

    #[test]
    fn even_subsymbol_count_is_flagged_singular() {
        let c = GfdmConfig::reference(4);
        let f = PrototypeFilter::<f64>::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        match ReceiverMatrix::build(&a, ReceiverKind::ZeroForcing) {
            Err(Error::Singular { rcond }) => assert!(rcond < ZF_RCOND_FLOOR),
            other => panic!("expected singularity, got {:?}", other.map(|r| r.rcond())),
        }
    }

    #[test]
    fn zero_power_gives_silence() {
        let c = small(4, 3, FilterKind::RaisedCosine);
        let f = PrototypeFilter::<f64>::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let x = modulate(&random_frame(&c, 1), &PowerAllocation::uniform(4, 0.0).unwrap(), &a).unwrap();
        assert!(x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn two_tone_example() {
        let c = small(2, 1, FilterKind::Rectangular);
        let f = PrototypeFilter::<f64>::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let frame = SymbolFrame::new(2, vec![Complex::new(1.0, 0.0); 2]).unwrap();
        let x = modulate(&frame, &PowerAllocation::uniform(2, 1.0).unwrap(), &a).unwrap();
        for (n, z) in x.iter().enumerate() {
            let expect = 2f64.sqrt() * (std::f64::consts::FRAC_PI_2 * n as f64).cos();
            assert!((z - Complex::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn negative_power_rejected() {
        assert!(matches!(PowerAllocation::new(vec![1.0, -0.1]), Err(Error::Domain(_))));
    }

    #[test]
    fn cp_examples() {
        let x: Vec<Complex<f64>> = (1..=4).map(|v| Complex::new(v as f64, 0.0)).collect();
        let y = add_cp(&x, 2).unwrap();
        let re: Vec<f64> = y.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![3.0, 4.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(remove_cp(&y, 2).unwrap(), x);
        assert_eq!(add_cp(&x, 0).unwrap(), x);
        assert!(add_cp(&x, 5).is_err());
        assert!(remove_cp(&x, 5).is_err());
    }

    #[test]
    fn zf_loopback_recovers_symbols() {
        let c = GfdmConfig::reference(5);
        let f = PrototypeFilter::<f64>::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let zf = ReceiverMatrix::build(&a, ReceiverKind::ZeroForcing).unwrap();
        let alloc = PowerAllocation::new((0..64).map(|k| 0.5 + k as f64 / 64.0).collect()).unwrap();
        let frame = random_frame(&c, 7);
        let x = modulate(&frame, &alloc, &a).unwrap();
        let est = demodulate(&x, &zf, &alloc).unwrap();
        let err = est
            .symbols()
            .iter()
            .zip(frame.symbols())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "max error {err}");
    }

    #[test]
    fn mf_loopback_exact_for_ofdm() {
        let c = small(8, 1, FilterKind::Rectangular);
        let f = PrototypeFilter::<f64>::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let mf = ReceiverMatrix::build(&a, ReceiverKind::MatchedFilter).unwrap();
        let alloc = PowerAllocation::uniform(8, 2.0).unwrap();
        let frame = random_frame(&c, 9);
        let est = demodulate(&modulate(&frame, &alloc, &a).unwrap(), &mf, &alloc).unwrap();
        for (a, b) in est.symbols().iter().zip(frame.symbols()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn demodulating_unpowered_subcarrier_fails() {
        let c = small(4, 1, FilterKind::Rectangular);
        let f = PrototypeFilter::<f64>::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let mf = ReceiverMatrix::build(&a, ReceiverKind::MatchedFilter).unwrap();
        let alloc = PowerAllocation::new(vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        let u = vec![Complex::new(0.0, 0.0); 4];
        assert!(matches!(demodulate(&u, &mf, &alloc), Err(Error::Domain(_))));
    }

    #[test]
    fn oversampled_synthesis_agrees_with_matrix_path() {
        for (m, filter) in [(5, FilterKind::RaisedCosine), (1, FilterKind::Rectangular), (3, FilterKind::RaisedCosine)] {
            let mut c = small(8, m, filter);
            c.rolloff = 0.3;
            let f = PrototypeFilter::<f64>::build(&c).unwrap();
            let a = ModulationMatrix::build(&c, &f).unwrap();
            let alloc = PowerAllocation::new((0..8).map(|k| 1.0 + k as f64).collect()).unwrap();
            let frame = random_frame(&c, 11);
            let x = modulate(&frame, &alloc, &a).unwrap();
            let synth = OversampledSynthesizer::<f64>::new(&c, 4).unwrap();
            let mut xo = Vec::new();
            synth.synthesize_into(&frame, &alloc, &mut xo).unwrap();
            assert_eq!(xo.len(), 4 * x.len());
            for (n, z) in x.iter().enumerate() {
                assert!((xo[4 * n] - z).norm() < 1e-9, "m={m} n={n}");
            }
        }
    }

    #[test]
    fn single_precision_path_builds() {
        let c = small(8, 3, FilterKind::RaisedCosine);
        let f = PrototypeFilter::<f32>::build(&c).unwrap();
        assert!((f.energy() - 1.0).abs() < 1e-5);
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let zf = ReceiverMatrix::build(&a, ReceiverKind::ZeroForcing).unwrap();
        assert!(zf.matrix().matmul(a.matrix()).max_abs_dev_from_identity() < 1e-4);
    }
}
