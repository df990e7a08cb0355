//! Closed-form link analytics for the linear GFDM receivers.
//!
//! Self-interference of the matched filter is described by the kernel
//!
//! ```text
//! f_{m',k'}(k) = p_s * sum_m | sum_n g_m[n] g_rx,m'[n] exp(j 2 pi (k - k') n / K) |^2
//! ```
//!
//! which depends on `k` and `k'` only through `(k - k') mod K`, so it is
//! stored as an `M x K` table indexed by `(m', d)`.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::waveform::{PowerAllocation, PrototypeFilter, ReceiverKind, ReceiverMatrix};

/// Negative self-interference down to this magnitude is rounding noise.
const CLAMP_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceKernel {
    subcarriers: usize,
    subsymbols: usize,
    mean_power: f64,
    values: Vec<f64>,
}

impl InterferenceKernel {
    pub fn new(
        tx: &PrototypeFilter<f64>,
        rx: &PrototypeFilter<f64>,
        subcarriers: usize,
        subsymbols: usize,
        mean_power: f64,
    ) -> Result<Self> {
        let n = subcarriers * subsymbols;
        if tx.len() != n || rx.len() != n {
            return Err(Error::Domain(format!(
                "filters of {} and {} taps, frame needs {n}",
                tx.len(),
                rx.len()
            )));
        }
        let tx_shift: Vec<Vec<f64>> = (0..subsymbols).map(|m| tx.circular_shift(m * subcarriers)).collect();
        let ifft = FftPlanner::<f64>::new().plan_fft_inverse(subcarriers);
        let mut values = vec![0.0; subsymbols * subcarriers];
        let mut buf = vec![Complex::new(0.0, 0.0); subcarriers];
        for mp in 0..subsymbols {
            let g_rx = rx.circular_shift(mp * subcarriers);
            let row = &mut values[mp * subcarriers..(mp + 1) * subcarriers];
            for g_tx in &tx_shift {
                // Fold the length-MK product onto one period of the
                // exponential, then evaluate every lag with one transform.
                buf.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
                for (i, (a, b)) in g_tx.iter().zip(&g_rx).enumerate() {
                    buf[i % subcarriers].re += a * b;
                }
                ifft.process(&mut buf);
                for (r, z) in row.iter_mut().zip(&buf) {
                    *r += mean_power * z.norm_sqr();
                }
            }
        }
        Ok(Self {
            subcarriers,
            subsymbols,
            mean_power,
            values,
        })
    }

    /// Matched-filter kernel, receive filter equal to the transmit filter.
    pub fn matched(filter: &PrototypeFilter<f64>, subcarriers: usize, subsymbols: usize, mean_power: f64) -> Result<Self> {
        Self::new(filter, filter, subcarriers, subsymbols, mean_power)
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn subsymbols(&self) -> usize {
        self.subsymbols
    }

    pub fn mean_power(&self) -> f64 {
        self.mean_power
    }

    /// f_{m',k'}(k).
    #[inline]
    pub fn get(&self, m_rx: usize, k_rx: usize, k: usize) -> f64 {
        let d = (k + self.subcarriers - k_rx) % self.subcarriers;
        self.values[m_rx * self.subcarriers + d]
    }

    /// f_{m'}(d) for all lags d.
    pub fn lags(&self, m_rx: usize) -> &[f64] {
        &self.values[m_rx * self.subcarriers..(m_rx + 1) * self.subcarriers]
    }

    /// sum_k f_{m',k'}(k), the same for every k'.
    pub fn row_sum(&self, m_rx: usize) -> f64 {
        self.lags(m_rx).iter().sum()
    }

    /// sum_k alpha_k f_{m',k'}(k) - p_s alpha_k' for every (m', k'),
    /// time-slot major. This is alpha_k' times the interference variance.
    pub fn self_interference(&self, alphas: &[f64]) -> Vec<f64> {
        let k_count = self.subcarriers;
        let mut out = Vec::with_capacity(self.subsymbols * k_count);
        for mp in 0..self.subsymbols {
            let lags = self.lags(mp);
            for kp in 0..k_count {
                let total: f64 = alphas
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * lags[(k + k_count - kp) % k_count])
                    .sum();
                out.push(total - self.mean_power * alphas[kp]);
            }
        }
        out
    }
}

/// sigma_n^2 = (1/alpha_k') sum_k alpha_k f_{m',k'}(k) - p_s.
pub fn mf_interference_variance(
    kernel: &InterferenceKernel,
    alloc: &PowerAllocation,
    k_rx: usize,
    m_rx: usize,
) -> Result<f64> {
    let a = alloc.alphas();
    if a[k_rx] == 0.0 {
        return Err(Error::Domain(format!("subcarrier {k_rx} carries no power")));
    }
    let total: f64 = a.iter().enumerate().map(|(k, ak)| ak * kernel.get(m_rx, k_rx, k)).sum();
    Ok(clamp_small_negative(total / a[k_rx] - kernel.mean_power()))
}

fn clamp_small_negative(v: f64) -> f64 {
    if v < 0.0 && v > -CLAMP_GUARD {
        0.0
    } else {
        v
    }
}

/// Power spectra |DFT(conj b)|^2 of every receiver row, cached so the
/// equivalent noise of a new channel costs one matrix-vector product.
#[derive(Debug, Clone)]
pub struct ReceiverSpectra {
    kind: ReceiverKind,
    subcarriers: usize,
    dim: usize,
    rows: Arc<Vec<f64>>,
}

impl ReceiverSpectra {
    pub fn new(b: &ReceiverMatrix<f64>) -> Self {
        let dim = b.dim();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(dim);
        let mut rows = Vec::with_capacity(dim * dim);
        let mut buf = vec![Complex::new(0.0, 0.0); dim];
        for r in 0..dim {
            for (z, v) in buf.iter_mut().zip(b.matrix().row(r)) {
                *z = v.conj();
            }
            fft.process(&mut buf);
            rows.extend(buf.iter().map(|z| z.norm_sqr()));
        }
        Self {
            kind: b.kind(),
            subcarriers: b.subcarriers(),
            dim,
            rows: Arc::new(rows),
        }
    }

    pub fn kind(&self) -> ReceiverKind {
        self.kind
    }

    /// C_{m',k'} = (N0/MK) sum_p |Z_{m',k'}[p]|^2 / |H[p]|^2 for every
    /// (m', k'), time-slot major.
    pub fn noise_base(&self, ch: &ChannelRealization<f64>, n0: f64) -> Result<NoiseBase> {
        if ch.freq_response().len() != self.dim {
            return Err(Error::Domain(format!(
                "channel response has {} bins, receiver needs {}",
                ch.freq_response().len(),
                self.dim
            )));
        }
        if let Some((bin, magnitude)) = ch.deep_fade() {
            return Err(Error::DeepFade { bin, magnitude });
        }
        let inv_h2: Vec<f64> = ch.power_response().iter().map(|p| 1.0 / p).collect();
        let scale = n0 / self.dim as f64;
        let values = self
            .rows
            .chunks_exact(self.dim)
            .map(|row| scale * row.iter().zip(&inv_h2).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        Ok(NoiseBase {
            subcarriers: self.subcarriers,
            values,
        })
    }
}

/// alpha-independent equivalent-noise terms C_{m',k'}.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBase {
    subcarriers: usize,
    values: Vec<f64>,
}

impl NoiseBase {
    pub fn from_values(subcarriers: usize, values: Vec<f64>) -> Result<Self> {
        if subcarriers == 0 || values.len() % subcarriers != 0 {
            return Err(Error::Domain("noise table does not tile whole subsymbols".into()));
        }
        Ok(Self { subcarriers, values })
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.values[m * self.subcarriers + k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn subsymbols(&self) -> usize {
        self.values.len() / self.subcarriers
    }

    /// Entries of subsymbol `m`, indexed by subcarrier.
    pub fn subsymbol(&self, m: usize) -> &[f64] {
        &self.values[m * self.subcarriers..(m + 1) * self.subcarriers]
    }
}

/// Equivalent noise variance of symbol (m', k') for power `alpha`, C / alpha.
pub fn equivalent_noise_variance(
    b: &ReceiverMatrix<f64>,
    ch: &ChannelRealization<f64>,
    n0: f64,
    k_rx: usize,
    m_rx: usize,
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain("equivalent noise needs a positive power".into()));
    }
    let dim = b.dim();
    if ch.freq_response().len() != dim {
        return Err(Error::Domain("channel and receiver sizes differ".into()));
    }
    if let Some((bin, magnitude)) = ch.deep_fade() {
        return Err(Error::DeepFade { bin, magnitude });
    }
    let mut buf: Vec<Complex<f64>> = b.row(m_rx, k_rx).iter().map(|z| z.conj()).collect();
    FftPlanner::new().plan_fft_forward(dim).process(&mut buf);
    let c: f64 = buf
        .iter()
        .zip(ch.freq_response())
        .map(|(z, h)| z.norm_sqr() / h.norm_sqr())
        .sum::<f64>()
        * n0
        / dim as f64;
    Ok(c / alpha)
}

/// Per-symbol SINR table and the noise terms it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    kind: ReceiverKind,
    subcarriers: usize,
    sinr: Vec<f64>,
    noise_var: Vec<f64>,
}

impl LinkMetrics {
    pub fn kind(&self) -> ReceiverKind {
        self.kind
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn subsymbols(&self) -> usize {
        self.sinr.len() / self.subcarriers
    }

    pub fn sinr(&self) -> &[f64] {
        &self.sinr
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.sinr[m * self.subcarriers + k]
    }

    pub fn noise_var(&self) -> &[f64] {
        &self.noise_var
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,k,gamma,noise_var")?;
        for (i, (g, c)) in self.sinr.iter().zip(&self.noise_var).enumerate() {
            writeln!(w, "{},{},{:.12e},{:.12e}", i / self.subcarriers, i % self.subcarriers, g, c)?;
        }
        Ok(())
    }
}

fn check_shapes(alloc: &PowerAllocation, c: &NoiseBase) -> Result<()> {
    if alloc.len() != c.subcarriers() {
        return Err(Error::Domain(format!(
            "allocation has {} entries, noise table {} subcarriers",
            alloc.len(),
            c.subcarriers()
        )));
    }
    Ok(())
}

/// Matched-filter SINR
/// R_T p_s alpha_k' / (sum_k alpha_k f_{m',k'}(k) - p_s alpha_k' + C_{m',k'}).
pub fn sinr_mf(kernel: &InterferenceKernel, alloc: &PowerAllocation, c: &NoiseBase, r_t: f64) -> Result<LinkMetrics> {
    check_shapes(alloc, c)?;
    if kernel.subcarriers() != c.subcarriers() || kernel.subsymbols() != c.subsymbols() {
        return Err(Error::Domain("kernel and noise table shapes differ".into()));
    }
    let a = alloc.alphas();
    let interference = kernel.self_interference(a);
    let k_count = c.subcarriers();
    let sinr = interference
        .iter()
        .zip(c.values())
        .enumerate()
        .map(|(i, (si, ci))| {
            let ak = a[i % k_count];
            if ak == 0.0 {
                return Ok(0.0);
            }
            let den = clamp_small_negative(*si).max(0.0) + ci;
            if !(den > 0.0) {
                return Err(Error::Degenerate(format!(
                    "symbol {i} sees neither noise nor interference"
                )));
            }
            Ok(r_t * kernel.mean_power() * ak / den)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LinkMetrics {
        kind: ReceiverKind::MatchedFilter,
        subcarriers: k_count,
        sinr,
        noise_var: c.values().to_vec(),
    })
}

/// Zero-forcing SNR R_T p_s alpha_k' / C_{m',k'}.
pub fn snr_zf(alloc: &PowerAllocation, c: &NoiseBase, mean_power: f64, r_t: f64) -> Result<LinkMetrics> {
    check_shapes(alloc, c)?;
    let a = alloc.alphas();
    let k_count = c.subcarriers();
    let sinr = c
        .values()
        .iter()
        .enumerate()
        .map(|(i, ci)| {
            let ak = a[i % k_count];
            if ak == 0.0 {
                Ok(0.0)
            } else if !(*ci > 0.0) {
                Err(Error::Degenerate(format!("symbol {i} sees no noise")))
            } else {
                Ok(r_t * mean_power * ak / ci)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LinkMetrics {
        kind: ReceiverKind::ZeroForcing,
        subcarriers: k_count,
        sinr,
        noise_var: c.values().to_vec(),
    })
}

/// Average symbol error probability over all (m, k):
/// 2((mu-1)/mu) mean erfc(x) - ((mu-1)/mu)^2 mean erfc(x)^2 with
/// x = sqrt(3 Gamma / (2 (2^mu - 1))).
///
/// The (mu-1)/mu prefactor coincides with the exact 1 - 2^(-mu/2) for QPSK
/// and 16-QAM only.
pub fn ser(metrics: &LinkMetrics, qam_bits: u32) -> f64 {
    let mu = qam_bits as f64;
    let a = (mu - 1.0) / mu;
    let order_m1 = (1u64 << qam_bits) as f64 - 1.0;
    let n = metrics.sinr.len() as f64;
    let (s1, s2) = metrics.sinr.iter().fold((0.0, 0.0), |(s1, s2), g| {
        let e = libm::erfc((1.5 * g / order_m1).sqrt());
        (s1 + e, s2 + e * e)
    });
    (2.0 * a * s1 / n - a * a * s2 / n).clamp(0.0, 1.0)
}

/// Spectral efficiency (1/MK) sum log2(1 + Gamma) in bit/s/Hz.
pub fn sum_rate(metrics: &LinkMetrics) -> f64 {
    mean_log2_1p(&metrics.sinr)
}

pub(crate) fn mean_log2_1p(values: &[f64]) -> f64 {
    values.iter().map(|g| g.ln_1p() / std::f64::consts::LN_2).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, exponential_pdp};
    use crate::config::{FilterKind, GfdmConfig};
    use crate::waveform::ModulationMatrix;

    fn cfg(k: usize, m: usize, filter: FilterKind) -> GfdmConfig {
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

    fn kernel_for(c: &GfdmConfig) -> InterferenceKernel {
        let f = PrototypeFilter::build(c).unwrap();
        InterferenceKernel::matched(&f, c.subcarriers, c.subsymbols, c.mean_symbol_power()).unwrap()
    }

    #[test]
    fn ofdm_kernel_is_diagonal() {
        let k = kernel_for(&cfg(4, 1, FilterKind::Rectangular));
        for kp in 0..4 {
            for kk in 0..4 {
                let expect = if kk == kp { 10.0 } else { 0.0 };
                assert!((k.get(0, kp, kk) - expect).abs() < 1e-12);
            }
        }
        let alloc = PowerAllocation::new(vec![1.0, 2.0, 0.5, 3.0]).unwrap();
        assert_eq!(mf_interference_variance(&k, &alloc, 2, 0).unwrap(), 0.0);
    }

    #[test]
    fn kernel_includes_own_symbol() {
        let k = kernel_for(&cfg(8, 3, FilterKind::RaisedCosine));
        for mp in 0..3 {
            assert!(k.get(mp, 2, 2) >= 10.0 - 1e-12);
        }
    }

    #[test]
    fn kernel_matches_direct_inner_products() {
        let c = cfg(8, 3, FilterKind::RaisedCosine);
        let f = PrototypeFilter::<f64>::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let kern = kernel_for(&c);
        let am = a.matrix();
        for mp in 0..3 {
            for kp in [0, 5] {
                for k in 0..8 {
                    let mut total = 0.0;
                    for m in 0..3 {
                        let col_rx = am.column(mp * 8 + kp);
                        let col_tx = am.column(m * 8 + k);
                        let ip: Complex<f64> = col_rx.iter().zip(&col_tx).map(|(r, t)| r.conj() * t).sum();
                        total += 10.0 * ip.norm_sqr();
                    }
                    assert!((kern.get(mp, kp, k) - total).abs() < 1e-10, "m'={mp} k'={kp} k={k}");
                }
            }
        }
    }

    #[test]
    fn uniform_power_cancels() {
        let k = kernel_for(&cfg(8, 3, FilterKind::RaisedCosine));
        let lo = mf_interference_variance(&k, &PowerAllocation::uniform(8, 0.1).unwrap(), 3, 1).unwrap();
        let hi = mf_interference_variance(&k, &PowerAllocation::uniform(8, 7.0).unwrap(), 3, 1).unwrap();
        assert!((lo - hi).abs() < 1e-10);
        assert!((lo - (k.row_sum(1) - 10.0)).abs() < 1e-10);
    }

    #[test]
    fn mf_noise_on_flat_channel_is_n0() {
        let c = GfdmConfig::reference(5);
        let f = PrototypeFilter::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let mf = ReceiverMatrix::build(&a, ReceiverKind::MatchedFilter).unwrap();
        let flat = ChannelRealization::from_taps(vec![Complex::new(1.0, 0.0)], 320).unwrap();
        let base = ReceiverSpectra::new(&mf).noise_base(&flat, 2.0).unwrap();
        assert!(base.values().iter().all(|c| (c - 2.0).abs() < 1e-10));
        let single = equivalent_noise_variance(&mf, &flat, 2.0, 17, 3, 4.0).unwrap();
        assert!((single - 0.5).abs() < 1e-10);
    }

    #[test]
    fn cached_and_direct_noise_agree() {
        let c = cfg(16, 3, FilterKind::RaisedCosine);
        let f = PrototypeFilter::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let ch = draw_channel(&exponential_pdp(4), 48, 12).unwrap();
        for kind in [ReceiverKind::MatchedFilter, ReceiverKind::ZeroForcing] {
            let b = ReceiverMatrix::build(&a, kind).unwrap();
            let base = ReceiverSpectra::new(&b).noise_base(&ch, 1.0).unwrap();
            for (m, k) in [(0, 0), (1, 7), (2, 15)] {
                let direct = equivalent_noise_variance(&b, &ch, 1.0, k, m, 1.0).unwrap();
                assert!((direct - base.get(m, k)).abs() < 1e-10 * direct);
            }
        }
    }

    #[test]
    fn mf_equals_zf_for_ofdm() {
        let c = cfg(8, 1, FilterKind::Rectangular);
        let f = PrototypeFilter::build(&c).unwrap();
        let a = ModulationMatrix::build(&c, &f).unwrap();
        let ch = draw_channel(&exponential_pdp(3), 8, 1).unwrap();
        let alloc = PowerAllocation::new((1..=8).map(f64::from).collect()).unwrap();
        let kern = kernel_for(&c);
        let mf_b = ReceiverMatrix::build(&a, ReceiverKind::MatchedFilter).unwrap();
        let zf_b = ReceiverMatrix::build(&a, ReceiverKind::ZeroForcing).unwrap();
        let cm = ReceiverSpectra::new(&mf_b).noise_base(&ch, 1.0).unwrap();
        let cz = ReceiverSpectra::new(&zf_b).noise_base(&ch, 1.0).unwrap();
        let g_mf = sinr_mf(&kern, &alloc, &cm, 0.9).unwrap();
        let g_zf = snr_zf(&alloc, &cz, 10.0, 0.9).unwrap();
        for (x, y) in g_mf.sinr().iter().zip(g_zf.sinr()) {
            assert!((x - y).abs() < 1e-9 * y);
        }
    }

    #[test]
    fn mf_sinr_definition_identity() {
        let c = cfg(8, 3, FilterKind::RaisedCosine);
        let kern = kernel_for(&c);
        let c_base = NoiseBase::from_values(8, (0..24).map(|i| 0.5 + i as f64 * 0.1).collect()).unwrap();
        let alloc = PowerAllocation::new((0..8).map(|k| 0.2 + k as f64).collect()).unwrap();
        let g = sinr_mf(&kern, &alloc, &c_base, 0.97).unwrap();
        for mp in 0..3 {
            for kp in 0..8 {
                let sigma = mf_interference_variance(&kern, &alloc, kp, mp).unwrap();
                let ak = alloc.alphas()[kp];
                let lhs = g.get(mp, kp) * (sigma + c_base.get(mp, kp) / ak);
                assert!((lhs - 0.97 * 10.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rc_mf_sinr_is_subsymbol_independent() {
        let c = GfdmConfig::reference(5);
        let kern = kernel_for(&c);
        let base = NoiseBase::from_values(64, vec![1.0; 320]).unwrap();
        let alloc = PowerAllocation::new((0..64).map(|k| 1.0 + (k % 7) as f64).collect()).unwrap();
        let g = sinr_mf(&kern, &alloc, &base, 1.0).unwrap();
        for m in 1..5 {
            for k in 0..64 {
                assert!((g.get(m, k) - g.get(0, k)).abs() < 1e-9 * g.get(0, k));
            }
        }
    }

    #[test]
    fn zero_power_gives_zero_sinr() {
        let base = NoiseBase::from_values(2, vec![1.0; 2]).unwrap();
        let g = snr_zf(&PowerAllocation::new(vec![0.0, 1.0]).unwrap(), &base, 10.0, 1.0).unwrap();
        assert_eq!(g.sinr()[0], 0.0);
        assert_eq!(g.sinr()[1], 10.0);
    }

    #[test]
    fn noiseless_ofdm_is_degenerate() {
        let c = cfg(4, 1, FilterKind::Rectangular);
        let kern = kernel_for(&c);
        let base = NoiseBase::from_values(4, vec![0.0; 4]).unwrap();
        let r = sinr_mf(&kern, &PowerAllocation::uniform(4, 1.0).unwrap(), &base, 1.0);
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    fn metrics_with(values: Vec<f64>, k: usize) -> LinkMetrics {
        let n = values.len();
        LinkMetrics {
            kind: ReceiverKind::ZeroForcing,
            subcarriers: k,
            sinr: values,
            noise_var: vec![1.0; n],
        }
    }

    #[test]
    fn ser_limits() {
        assert!((ser(&metrics_with(vec![0.0; 8], 4), 4) - 0.9375).abs() < 1e-15);
        assert!(ser(&metrics_with(vec![1e9; 8], 4), 4) < 1e-300);
    }

    #[test]
    fn ser_matches_textbook_for_16qam() {
        for snr_db in [0.0, 8.0, 14.0, 20.0] {
            let g = 10f64.powf(snr_db / 10.0);
            let ours = ser(&metrics_with(vec![g; 4], 4), 4);
            let book = crate::qam::square_qam_ser(4, g);
            assert!((ours - book).abs() < 1e-12);
        }
    }

    #[test]
    fn ser_decreases_in_each_entry() {
        let base = vec![3.0, 10.0, 30.0, 5.0];
        let before = ser(&metrics_with(base.clone(), 4), 4);
        for i in 0..4 {
            let mut v = base.clone();
            v[i] *= 1.1;
            assert!(ser(&metrics_with(v, 4), 4) < before);
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(sum_rate(&metrics_with(vec![0.0; 320], 64)), 0.0);
        assert!((sum_rate(&metrics_with(vec![1.0; 320], 64)) - 1.0).abs() < 1e-15);
        let mut v = vec![0.0; 320];
        v[17] = 3.0;
        assert!((sum_rate(&metrics_with(v, 64)) - 0.00625).abs() < 1e-15);
    }

    #[test]
    fn zf_scale_law() {
        let c1 = NoiseBase::from_values(4, vec![0.3, 0.7, 1.1, 2.0]).unwrap();
        let c2 = NoiseBase::from_values(4, c1.values().iter().map(|v| 2.0 * v).collect()).unwrap();
        let a1 = PowerAllocation::new(vec![1.0, 0.5, 2.0, 0.1]).unwrap();
        let a2 = a1.scaled(2.0).unwrap();
        let g1 = snr_zf(&a1, &c1, 10.0, 0.9).unwrap();
        let g2 = snr_zf(&a2, &c2, 10.0, 0.9).unwrap();
        for (x, y) in g1.sinr().iter().zip(g2.sinr()) {
            assert!((x - y).abs() < 1e-12 * x);
        }
    }

    #[test]
    fn metrics_csv() {
        let mut buf = Vec::new();
        metrics_with(vec![1.0, 2.0], 2).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "m,k,gamma,noise_var");
        assert!(lines[2].starts_with("0,1,2.0"));
    }
}
