//! Monte-Carlo symbol error rate beside the analytic value.

use num_complex::Complex;
use rayon::prelude::*;

use crate::channel::{apply_channel_with, ChannelRealization, Equalizer, NoiseSpec};
use crate::config::GfdmConfig;
use crate::error::Result;
use crate::link::{ser, sinr_mf, snr_zf, InterferenceKernel, ReceiverSpectra};
use crate::num::db_to_linear;
use crate::qam::Qam;
use crate::seed::{self, stream};
use crate::waveform::{
    add_cp, demodulate, modulate, remove_cp, ModulationMatrix, PowerAllocation, PrototypeFilter, ReceiverKind,
    ReceiverMatrix, SymbolFrame,
};

use super::table::{ResultTable, RunOutput};
use super::{draw_shared_channel, waveform_label, ExperimentConfig, Scenario};

struct Link {
    label: String,
    config: GfdmConfig,
    a: ModulationMatrix<f64>,
    receivers: Vec<(ReceiverMatrix<f64>, ReceiverSpectra)>,
    kernel: InterferenceKernel,
}

impl Link {
    fn new(config: &GfdmConfig) -> Result<Self> {
        let filter = PrototypeFilter::<f64>::build(config)?;
        let a = ModulationMatrix::build(config, &filter)?;
        // Rectangular single-subsymbol frames are orthogonal: both receivers
        // coincide, so only one is run.
        let kinds: &[ReceiverKind] = if config.subsymbols == 1 {
            &[ReceiverKind::ZeroForcing]
        } else {
            &[ReceiverKind::MatchedFilter, ReceiverKind::ZeroForcing]
        };
        let receivers = kinds
            .iter()
            .map(|&k| {
                let b = ReceiverMatrix::build(&a, k)?;
                let s = ReceiverSpectra::new(&b);
                Ok((b, s))
            })
            .collect::<Result<Vec<_>>>()?;
        let kernel = InterferenceKernel::matched(&filter, config.subcarriers, config.subsymbols, config.mean_symbol_power())?;
        Ok(Self {
            label: waveform_label(config),
            config: config.clone(),
            a,
            receivers,
            kernel,
        })
    }
}

/// Errors per frame for each receiver, plus the analytic SER.
struct TaskResult {
    frame_errors: Vec<Vec<u32>>,
    analytic: Vec<f64>,
}

fn run_task(
    link: &Link,
    ch: &ChannelRealization<f64>,
    es_n0_db: f64,
    n0: f64,
    frames: usize,
    seed: u64,
) -> Result<TaskResult> {
    let cfg = &link.config;
    let qam = Qam::new(cfg.qam_bits)?;
    let k = cfg.subcarriers;
    let r_t = cfg.rate_penalty();
    // Es = p_s alpha for a uniform allocation.
    let alpha = db_to_linear(es_n0_db) * n0 / cfg.mean_symbol_power();
    let alloc = PowerAllocation::uniform(k, alpha)?;
    // The prefix costs a fraction 1 - R_T of each frame's energy; charging
    // it to the noise keeps the data samples at unit scale.
    let noise_n0 = n0 / r_t;
    let analytic = link
        .receivers
        .iter()
        .map(|(_, spectra)| {
            let c = spectra.noise_base(ch, noise_n0)?;
            let m = match spectra.kind() {
                ReceiverKind::MatchedFilter => sinr_mf(&link.kernel, &alloc, &c, 1.0)?,
                ReceiverKind::ZeroForcing => snr_zf(&alloc, &c, cfg.mean_symbol_power(), 1.0)?,
            };
            Ok(ser(&m, cfg.qam_bits))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = seed::rng(seed);
    let eq = Equalizer::new(ch)?;
    let noise = NoiseSpec::new(noise_n0)?;
    let n = cfg.frame_len();
    let mut frame_errors = vec![Vec::with_capacity(frames); link.receivers.len()];
    for _ in 0..frames {
        let symbols: Vec<Complex<f64>> = (0..n).map(|_| qam.random_symbol(&mut rng)).collect();
        let frame = SymbolFrame::new(k, symbols)?;
        let x = add_cp(&modulate(&frame, &alloc, &link.a)?, cfg.cp_len)?;
        let y = apply_channel_with(&x, ch, noise, cfg.cp_len, &mut rng)?;
        let u = eq.equalize(&remove_cp(&y, cfg.cp_len)?)?;
        for (errs, (b, _)) in frame_errors.iter_mut().zip(&link.receivers) {
            let est = demodulate(&u, b, &alloc)?;
            let e = est
                .symbols()
                .iter()
                .zip(frame.symbols())
                .filter(|(z, s)| qam.decide(**z) != **s)
                .count();
            errs.push(e as u32);
        }
    }
    Ok(TaskResult { frame_errors, analytic })
}

/// Sweeps E_s/N0 with uniform power for the main waveform, every comparison
/// variant and OFDM, all over the same channel draws.
///
/// The standard error treats frames as independent samples and channel
/// draws as fixed, which is the right band for comparing against the
/// analytic value averaged over the same draws.
pub fn run_ser(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut out = RunOutput::new(Scenario::Ser, config.seed);
    let waveforms = config.psd_waveforms();
    let links = waveforms.iter().map(Link::new).collect::<Result<Vec<_>>>()?;
    let fft_lens: Vec<usize> = waveforms.iter().map(|w| w.frame_len()).collect();

    let n_ch = config.ser_channels;
    let channel_seeds: Vec<u64> = (0..n_ch as u64).map(|c| seed::derive(config.seed, stream::SU_CHANNEL, c)).collect();
    let draws = channel_seeds
        .par_iter()
        .map(|&s| draw_shared_channel(config.channel_taps, &fft_lens, &mut seed::rng(s)))
        .collect::<Result<Vec<_>>>()?;
    let rejected: usize = draws.iter().map(|d| d.1).sum();
    let reject_rate = rejected as f64 / (rejected + n_ch) as f64;
    if reject_rate > 0.1 {
        out.warnings.push(format!(
            "{:.1}% of channel draws were rejected for deep fades",
            100.0 * reject_rate
        ));
    }
    out.seeds.push(("su_channel.first".into(), channel_seeds[0]));

    let points = &config.es_n0_db;
    let tasks: Vec<(usize, usize, usize)> = (0..links.len())
        .flat_map(|w| (0..n_ch).flat_map(move |c| (0..points.len()).map(move |p| (w, c, p))))
        .collect();
    let results = tasks
        .par_iter()
        .enumerate()
        .map(|(i, &(w, c, p))| {
            let frames = config.ser_symbols.div_ceil(n_ch * fft_lens[w]).max(2);
            let s = seed::derive(config.seed, stream::SYMBOLS, i as u64);
            run_task(&links[w], &draws[c].0[w], points[p], config.n0, frames, s)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = ResultTable::new(
        "ser",
        &[
            "waveform", "subsymbols", "receiver", "es_n0_db", "ser_sim", "ser_std_err", "ser_analytic", "errors",
            "symbols", "channels",
        ],
    );
    for (w, link) in links.iter().enumerate() {
        let n = fft_lens[w];
        for (r, (b, _)) in link.receivers.iter().enumerate() {
            for (p, &x) in points.iter().enumerate() {
                let (mut sim, mut var, mut analytic, mut errors, mut symbols) = (0.0, 0.0, 0.0, 0u64, 0usize);
                for c in 0..n_ch {
                    let res = &results[(w * n_ch + c) * points.len() + p];
                    let fe = &res.frame_errors[r];
                    let f = fe.len() as f64;
                    let rates: Vec<f64> = fe.iter().map(|&e| e as f64 / n as f64).collect();
                    let mean = rates.iter().sum::<f64>() / f;
                    let s2 = rates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (f - 1.0);
                    sim += mean;
                    var += s2 / f;
                    analytic += res.analytic[r];
                    errors += fe.iter().map(|&e| e as u64).sum::<u64>();
                    symbols += fe.len() * n;
                }
                let c = n_ch as f64;
                table.push(vec![
                    link.label.clone().into(),
                    link.config.subsymbols.into(),
                    b.kind().label().into(),
                    x.into(),
                    (sim / c).into(),
                    (var.sqrt() / c).into(),
                    (analytic / c).into(),
                    (errors as usize).into(),
                    symbols.into(),
                    n_ch.into(),
                ]);
            }
        }
    }
    out.tables.push(table);
    Ok(out)
}
