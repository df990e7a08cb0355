//! Periodogram of long synthesized streams against the analytic PSD.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::num::linear_to_db;
use crate::qam::Qam;
use crate::seed::{self, stream};
use crate::spectrum::{PsdModel, SpectralDensity, WelchEstimator};
use crate::waveform::{OversampledSynthesizer, PowerAllocation, SymbolFrame};

use super::table::{ResultTable, RunOutput};
use super::{waveform_label, ExperimentConfig, Scenario};

/// Largest deviations between two PSDs on the same grid, compared as means
/// over cells of adjacent bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdComparison {
    pub inband_max_db: f64,
    pub oob_max_db: f64,
    pub inband_cells: usize,
    pub oob_cells: usize,
}

/// Cells whose centre lies inside `band` by at least `guard` count as in
/// band; cells at least `guard` outside it count as out of band when the
/// reference is no more than `floor_db` below its peak cell.
pub fn compare_psd(
    estimate: &SpectralDensity,
    reference: &SpectralDensity,
    band: (f64, f64),
    guard: f64,
    cell: usize,
    floor_db: f64,
) -> Result<PsdComparison> {
    if estimate.freqs() != reference.freqs() {
        return Err(Error::Domain("spectra are on different grids".into()));
    }
    let est = estimate.cell_means(cell);
    let refc = reference.cell_means(cell);
    let peak = refc.iter().map(|c| c.1).fold(0.0, f64::max);
    let floor = peak * 10f64.powf(-floor_db.abs() / 10.0);
    let mut cmp = PsdComparison {
        inband_max_db: 0.0,
        oob_max_db: 0.0,
        inband_cells: 0,
        oob_cells: 0,
    };
    for ((f, e), (_, r)) in est.iter().zip(&refc) {
        let dev = (linear_to_db(*e) - linear_to_db(*r)).abs();
        if *f >= band.0 + guard && *f <= band.1 - guard {
            cmp.inband_max_db = cmp.inband_max_db.max(dev);
            cmp.inband_cells += 1;
        } else if (*f <= band.0 - guard || *f >= band.1 + guard) && *r >= floor {
            cmp.oob_max_db = cmp.oob_max_db.max(dev);
            cmp.oob_cells += 1;
        }
    }
    Ok(cmp)
}

/// Edges in Hz of the band spanned by the subcarriers, half a spacing
/// beyond the outermost centres.
pub fn occupied_band(cfg: &crate::config::GfdmConfig) -> (f64, f64) {
    let spacing = 1.0 / cfg.symbol_duration;
    let lo = cfg.subcarrier_offset(0) as f64 - 0.5;
    let hi = cfg.subcarrier_offset(cfg.subcarriers - 1) as f64 + 0.5;
    (lo * spacing, hi * spacing)
}

/// Mean of `psd` over `[centre - half, centre + half]`.
fn band_mean(psd: &SpectralDensity, centre: f64, half: f64) -> f64 {
    let (sum, n) = psd
        .freqs()
        .iter()
        .zip(psd.values())
        .filter(|(f, _)| (**f - centre).abs() <= half)
        .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Random subcarrier powers with mean one, shared by every waveform.
pub(crate) fn random_allocation(subcarriers: usize, seed: u64) -> Result<PowerAllocation> {
    let mut rng = seed::rng(seed);
    let raw: Vec<f64> = (0..subcarriers).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    PowerAllocation::new(raw.iter().map(|a| a * subcarriers as f64 / total).collect())
}

/// Estimates the PSD of the main waveform, the comparison variants and
/// OFDM from frames carrying random QAM data, all with the same random
/// allocation and so the same total power. Every stream has the same number
/// of samples.
pub fn run_psd(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut out = RunOutput::new(Scenario::Psd, config.seed);
    let waveforms = config.psd_waveforms();
    let k = config.waveform.subcarriers;
    let l = config.psd_oversampling;
    let points = config.psd_nfft / (l * k);
    let alloc_seed = seed::derive(config.seed, stream::ALLOCATION, 0);
    out.seeds.push(("allocation".into(), alloc_seed));
    let alloc = random_allocation(k, alloc_seed)?;
    let max_m = waveforms.iter().map(|w| w.subsymbols).max().unwrap_or(1);

    let spectra = waveforms
        .par_iter()
        .enumerate()
        .map(|(w, cfg)| {
            let synth = OversampledSynthesizer::<f64>::new(cfg, l)?;
            let qam = Qam::new(cfg.qam_bits)?;
            let fs = (k * l) as f64 / cfg.symbol_duration;
            let mut welch = WelchEstimator::<f64>::half_overlap(config.psd_nfft, fs)?;
            let mut rng = seed::derive_rng(config.seed, stream::SYMBOLS, w as u64);
            let frames = config.psd_frames * max_m.div_ceil(cfg.subsymbols);
            let mut buf = Vec::with_capacity(synth.block_len());
            for _ in 0..frames {
                let symbols = (0..cfg.frame_len()).map(|_| qam.random_symbol(&mut rng)).collect();
                synth.synthesize_into(&SymbolFrame::new(k, symbols)?, &alloc, &mut buf)?;
                welch.push(&buf);
                buf.clear();
            }
            let estimated = welch.finish()?;
            let analytic = PsdModel::new(cfg, l, points)?.psd(&alloc)?;
            Ok((estimated, analytic, welch.segments()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summary = ResultTable::new(
        "psd_summary",
        &[
            "waveform",
            "subsymbols",
            "segments",
            "inband_max_dev_db",
            "oob_max_dev_db",
            "inband_cells",
            "oob_cells",
            "adjacent_analytic_db",
            "adjacent_estimated_db",
            "total_power_w",
        ],
    );
    for (cfg, (est, ana, segments)) in waveforms.iter().zip(&spectra) {
        let label = waveform_label(cfg);
        let spacing = 1.0 / cfg.symbol_duration;
        let band = occupied_band(cfg);
        let cmp = compare_psd(est, ana, band, spacing, config.psd_cell, 50.0)?;
        // Centre of the equally wide channel just above the occupied band.
        let adjacent = band.1 + k as f64 * spacing / 2.0;
        let mut t = ResultTable::new(&format!("psd_{label}"), &["freq_hz", "psd_est_db", "psd_analytic_db"]);
        for ((f, e), a) in est.freqs().iter().zip(est.values()).zip(ana.values()) {
            t.push(vec![(*f).into(), linear_to_db(*e).into(), linear_to_db(*a).into()]);
        }
        out.tables.push(t);
        summary.push(vec![
            label.into(),
            cfg.subsymbols.into(),
            (*segments).into(),
            cmp.inband_max_db.into(),
            cmp.oob_max_db.into(),
            cmp.inband_cells.into(),
            cmp.oob_cells.into(),
            linear_to_db(band_mean(ana, adjacent, spacing / 2.0)).into(),
            linear_to_db(band_mean(est, adjacent, spacing / 2.0)).into(),
            ana.bin_sum().into(),
        ]);
    }
    out.tables.push(summary);
    Ok(out)
}
