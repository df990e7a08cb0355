//! Experiment orchestration: configs, scenario runners and CSV output.
//!
//! Every scenario derives its random streams from the master seed before
//! any work is dispatched, runs independent tasks on the rayon pool and
//! merges results in task order, so output does not depend on the thread
//! count.

mod alloc;
mod config;
mod psd;
mod ser;
mod table;

pub use alloc::{run_capacity, run_capacity_and_interference, run_interference, run_sweep_qn, INTERFERENCE_SLACK_DB};
pub use config::{parse_grid, table_qn, Averaging, ExperimentConfig, QnMode, Scenario};
pub use psd::{compare_psd, occupied_band, run_psd, PsdComparison};
pub use ser::run_ser;
pub use table::{mean_se, ResultTable, RunOutput, Value};

use num_complex::Complex;
use rand::Rng;

use crate::channel::{draw_channel_with, exponential_pdp, ChannelRealization};
use crate::config::GfdmConfig;
use crate::error::{Error, Result};

pub fn run(scenario: Scenario, config: &ExperimentConfig) -> Result<RunOutput> {
    match scenario {
        Scenario::Ser => run_ser(config),
        Scenario::Psd => run_psd(config),
        Scenario::SweepQn => run_sweep_qn(config),
        Scenario::Capacity => run_capacity(config),
        Scenario::Interference => run_interference(config),
    }
}

/// Short label used in tables, e.g. `gfdm_m5` or `ofdm`.
pub fn waveform_label(w: &GfdmConfig) -> String {
    if w.subsymbols == 1 && w.filter == crate::config::FilterKind::Rectangular {
        "ofdm".into()
    } else {
        format!("gfdm_m{}", w.subsymbols)
    }
}

/// Draws one set of taps whose response has no deep fade at any of the
/// transform lengths in `fft_lens`. Returns one realization per length and
/// the number of rejected draws.
pub fn draw_shared_channel<R: Rng + ?Sized>(
    taps: usize,
    fft_lens: &[usize],
    rng: &mut R,
) -> Result<(Vec<ChannelRealization<f64>>, usize)> {
    const MAX_REJECTIONS: usize = 1000;
    let pdp = exponential_pdp(taps);
    let first = *fft_lens.first().ok_or_else(|| Error::Domain("no transform length".into()))?;
    for rejected in 0..MAX_REJECTIONS {
        let base = draw_channel_with::<f64, _>(&pdp, first, rng)?;
        let taps: Vec<Complex<f64>> = base.taps().to_vec();
        let all = fft_lens
            .iter()
            .map(|&n| ChannelRealization::from_taps(taps.clone(), n))
            .collect::<Result<Vec<_>>>()?;
        if all.iter().all(|c| c.deep_fade().is_none()) {
            return Ok((all, rejected));
        }
    }
    Err(Error::Degenerate(format!(
        "{MAX_REJECTIONS} consecutive channel draws hit a deep fade"
    )))
}
