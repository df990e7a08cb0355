//! Flat `key = value` experiment files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::allocator::{SolverOptions, StepRule};
use crate::config::{FilterKind, GfdmConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Ser,
    Psd,
    SweepQn,
    Capacity,
    Interference,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Ser,
        Scenario::Psd,
        Scenario::SweepQn,
        Scenario::Capacity,
        Scenario::Interference,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Ser => "ser",
            Scenario::Psd => "psd",
            Scenario::SweepQn => "sweep-qn",
            Scenario::Capacity => "capacity",
            Scenario::Interference => "interference",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// How the matched-filter self-interference bound is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QnMode {
    /// Search a grid relative to the bound met by uniform allocation.
    Sweep,
    /// Optimum values tabulated per constraint level for M = 5 and M = 15.
    Table,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Every result comes from realization 0.
    Fixed,
    Average,
}

/// Everything an experiment needs besides the scenario and master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub waveform: GfdmConfig,
    /// Extra subsymbol counts compared in the `ser` and `psd` runs.
    pub compare_subsymbols: Vec<usize>,
    pub ofdm_cp_len: usize,
    pub channel_taps: usize,
    pub n0: f64,
    pub alpha_max_dbm: f64,
    pub q_grid_dbm: Vec<f64>,
    pub qn: QnMode,
    /// Relative search grid for `QnMode::Sweep`: `(lo, hi, points)`.
    pub qn_search: (f64, f64, usize),
    /// Absolute grid of the `sweep-qn` scenario.
    pub qn_grid: Vec<f64>,
    pub sweep_q_dbm: f64,
    pub realizations: usize,
    pub averaging: Averaging,
    pub es_n0_db: Vec<f64>,
    pub ser_symbols: usize,
    pub ser_channels: usize,
    pub psd_frames: usize,
    pub psd_nfft: usize,
    pub psd_oversampling: usize,
    /// Bins per comparison cell.
    pub psd_cell: usize,
    pub solver: SolverOptions,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            waveform: GfdmConfig::reference(5),
            compare_subsymbols: vec![15],
            ofdm_cp_len: 10,
            channel_taps: 10,
            n0: 1.0,
            alpha_max_dbm: 55.0,
            q_grid_dbm: (0..12).map(|i| -20.0 + 5.0 * i as f64).collect(),
            qn: QnMode::Sweep,
            qn_search: (1.0, 256.0, 25),
            qn_grid: (0..50).map(|i| 0.01 + 0.01 * i as f64).collect(),
            sweep_q_dbm: 5.0,
            realizations: 50,
            averaging: Averaging::Average,
            es_n0_db: (0..16).map(|i| 2.0 * i as f64).collect(),
            ser_symbols: 200_000,
            ser_channels: 20,
            psd_frames: 1000,
            psd_nfft: 65_536,
            psd_oversampling: 8,
            psd_cell: 32,
            solver: SolverOptions::default(),
            seed: 1,
        }
    }
}

/// Parses `a:step:b` (inclusive), `a, b, c` or a single number.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let values = match parts.as_slice() {
        [single] => single
            .split(',')
            .map(|v| parse_f64(v.trim()))
            .collect::<Result<Vec<_>>>()?,
        [a, step, b] => {
            let (a, step, b) = (parse_f64(a)?, parse_f64(step)?, parse_f64(b)?);
            if step == 0.0 || (b - a) / step < 0.0 {
                return Err(Error::Config(format!("range `{text}` never reaches its end")));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            if n > 1_000_000 {
                return Err(Error::Config(format!("range `{text}` has {n} points")));
            }
            // Multiply rather than accumulate so grid points stay exact.
            (0..n).map(|i| a + step * i as f64).collect()
        }
        _ => return Err(Error::Config(format!("cannot read `{text}` as a grid"))),
    };
    if values.is_empty() {
        return Err(Error::Config("grid is empty".into()));
    }
    Ok(values)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("`{s}` is not a finite number")))
}

fn parse_count(key: &str, s: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::Config(format!("`{key}` must be a positive integer, got `{s}`"))),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Reads a config; unknown keys and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim().to_ascii_lowercase();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: `{key}` set twice", n + 1)));
            }
        }
        let mut cfg = Self::default();
        let mut step_size = None;
        let mut step_kind = "spectral".to_string();
        for (key, value) in &entries {
            let v = value.as_str();
            let w = &mut cfg.waveform;
            match key.as_str() {
                "subcarriers" => w.subcarriers = parse_count(key, v)?,
                "subsymbols" => w.subsymbols = parse_count(key, v)?,
                "rolloff" => w.rolloff = parse_f64(v)?,
                "cp_len" => {
                    w.cp_len = v
                        .parse()
                        .map_err(|_| Error::Config(format!("`cp_len` must be an integer, got `{v}`")))?
                }
                "qam_bits" => w.qam_bits = parse_count(key, v)? as u32,
                "ts_us" => {
                    // Parsed with the exponent attached so `33.3` rounds like `33.3e-6`.
                    let exact = v.parse::<f64>().is_ok() && !v.contains(['e', 'E']);
                    w.symbol_duration =
                        if exact { parse_f64(&format!("{v}e-6"))? } else { parse_f64(v)? / 1e6 }
                }
                "filter" => w.filter = v.parse::<FilterKind>()?,
                "compare_subsymbols" => {
                    cfg.compare_subsymbols = if v.eq_ignore_ascii_case("none") {
                        Vec::new()
                    } else {
                        v.split(',').map(|s| parse_count(key, s.trim())).collect::<Result<_>>()?
                    }
                }
                "ofdm_cp_len" => {
                    cfg.ofdm_cp_len = v
                        .parse()
                        .map_err(|_| Error::Config(format!("`ofdm_cp_len` must be an integer, got `{v}`")))?
                }
                "channel_taps" => cfg.channel_taps = parse_count(key, v)?,
                "n0" => cfg.n0 = parse_f64(v)?,
                "alpha_max_dbm" => cfg.alpha_max_dbm = parse_f64(v)?,
                "q_grid_dbm" => cfg.q_grid_dbm = parse_grid(v)?,
                "qn" => {
                    cfg.qn = match v.to_ascii_lowercase().as_str() {
                        "sweep" => QnMode::Sweep,
                        "table" => QnMode::Table,
                        _ => QnMode::Fixed(parse_f64(v)?),
                    }
                }
                "qn_search" => {
                    let g = parse_grid(v)?;
                    if g.len() != 3 {
                        return Err(Error::Config("`qn_search` takes `lo, hi, points`".into()));
                    }
                    cfg.qn_search = (g[0], g[1], g[2] as usize);
                }
                "qn_grid" => cfg.qn_grid = parse_grid(v)?,
                "sweep_q_dbm" => cfg.sweep_q_dbm = parse_f64(v)?,
                "realizations" => cfg.realizations = parse_count(key, v)?,
                "averaging" => {
                    cfg.averaging = match v.to_ascii_lowercase().as_str() {
                        "fixed" => Averaging::Fixed,
                        "average" => Averaging::Average,
                        _ => return Err(Error::Config(format!("`averaging` is `fixed` or `average`, got `{v}`"))),
                    }
                }
                "es_n0_db" => cfg.es_n0_db = parse_grid(v)?,
                "ser_symbols" => cfg.ser_symbols = parse_count(key, v)?,
                "ser_channels" => cfg.ser_channels = parse_count(key, v)?,
                "psd_frames" => cfg.psd_frames = parse_count(key, v)?,
                "psd_nfft" => cfg.psd_nfft = parse_count(key, v)?,
                "psd_oversampling" => cfg.psd_oversampling = parse_count(key, v)?,
                "psd_cell" => cfg.psd_cell = parse_count(key, v)?,
                "solver_eps" => cfg.solver.eps = parse_f64(v)?,
                "solver_gap_tol" => cfg.solver.gap_tol = parse_f64(v)?,
                "solver_max_iter" => cfg.solver.max_iterations = parse_count(key, v)?,
                "solver_step" => step_kind = v.to_ascii_lowercase(),
                "solver_step_size" => step_size = Some(parse_f64(v)?),
                "seed" => {
                    cfg.seed = v
                        .parse()
                        .map_err(|_| Error::Config(format!("`seed` must be a non-negative integer, got `{v}`")))?
                }
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        cfg.solver.step = match (step_kind.as_str(), step_size) {
            ("spectral", None) => StepRule::Spectral,
            ("diminishing", z) => StepRule::Diminishing(z),
            ("constant", Some(z)) => StepRule::Constant(z),
            ("constant", None) => return Err(Error::Config("constant steps need `solver_step_size`".into())),
            ("spectral", Some(_)) => return Err(Error::Config("spectral steps take no `solver_step_size`".into())),
            (other, _) => return Err(Error::Config(format!("unknown step rule `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.waveform.validate()?;
        for &m in &self.compare_subsymbols {
            self.variant(m).validate()?;
        }
        self.ofdm().validate()?;
        if self.channel_taps > self.waveform.cp_len + 1 || self.channel_taps > self.ofdm_cp_len + 1 {
            return Err(Error::Config(format!(
                "{} channel taps exceed what the cyclic prefixes absorb",
                self.channel_taps
            )));
        }
        if !(self.n0 > 0.0) {
            return Err(Error::Config("`n0` must be positive".into()));
        }
        let (lo, hi, n) = self.qn_search;
        if !(lo > 0.0 && hi >= lo && n > 0) {
            return Err(Error::Config("`qn_search` needs 0 < lo <= hi and points > 0".into()));
        }
        if self.qn_grid.iter().any(|q| !(*q > 0.0)) {
            return Err(Error::Config("`qn_grid` values must be positive".into()));
        }
        if let QnMode::Fixed(q) = self.qn {
            if !(q > 0.0) {
                return Err(Error::Config("`qn` must be positive".into()));
            }
        }
        if self.psd_nfft % (self.psd_oversampling * self.waveform.subcarriers) != 0 {
            return Err(Error::Config(
                "`psd_nfft` must be a multiple of psd_oversampling * subcarriers".into(),
            ));
        }
        let points = self.psd_nfft / (self.psd_oversampling * self.waveform.subcarriers);
        let max_m = self.psd_waveforms().iter().map(|w| w.subsymbols).max().unwrap_or(1);
        if points % 2 != 0 || points < max_m {
            return Err(Error::Config(format!(
                "`psd_nfft` gives {points} points per subcarrier; need an even number of at least {max_m}"
            )));
        }
        Ok(())
    }

    /// Same waveform with `m` subsymbols.
    pub fn variant(&self, m: usize) -> GfdmConfig {
        GfdmConfig {
            subsymbols: m,
            ..self.waveform.clone()
        }
    }

    /// The OFDM baseline: one subsymbol, rectangular pulse, CP per symbol.
    pub fn ofdm(&self) -> GfdmConfig {
        GfdmConfig {
            qam_bits: self.waveform.qam_bits,
            symbol_duration: self.waveform.symbol_duration,
            ..GfdmConfig::ofdm(self.waveform.subcarriers, self.ofdm_cp_len)
        }
    }

    /// Main waveform, comparison variants, then OFDM.
    pub fn psd_waveforms(&self) -> Vec<GfdmConfig> {
        let mut out = vec![self.waveform.clone()];
        out.extend(self.compare_subsymbols.iter().map(|&m| self.variant(m)));
        out.push(self.ofdm());
        out
    }

    /// Number of channel/gain realizations the allocation runs average.
    pub fn realization_count(&self) -> usize {
        match self.averaging {
            Averaging::Fixed => 1,
            Averaging::Average => self.realizations,
        }
    }

    /// Every resolved parameter except the seed, one `key = value` per line
    /// in key order.
    pub fn canonical(&self) -> String {
        let w = &self.waveform;
        let mut m = BTreeMap::new();
        m.insert("subcarriers", w.subcarriers.to_string());
        m.insert("subsymbols", w.subsymbols.to_string());
        m.insert("rolloff", format!("{:?}", w.rolloff));
        m.insert("cp_len", w.cp_len.to_string());
        m.insert("qam_bits", w.qam_bits.to_string());
        m.insert("ts_us", format!("{:?}", w.symbol_duration * 1e6));
        m.insert(
            "filter",
            match w.filter {
                FilterKind::RaisedCosine => "rc".into(),
                FilterKind::Rectangular => "rect".into(),
            },
        );
        m.insert(
            "compare_subsymbols",
            if self.compare_subsymbols.is_empty() {
                "none".into()
            } else {
                self.compare_subsymbols.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
            },
        );
        m.insert("ofdm_cp_len", self.ofdm_cp_len.to_string());
        m.insert("channel_taps", self.channel_taps.to_string());
        m.insert("n0", format!("{:?}", self.n0));
        m.insert("alpha_max_dbm", format!("{:?}", self.alpha_max_dbm));
        m.insert("q_grid_dbm", fmt_list(&self.q_grid_dbm));
        m.insert(
            "qn",
            match self.qn {
                QnMode::Sweep => "sweep".into(),
                QnMode::Table => "table".into(),
                QnMode::Fixed(q) => format!("{q:?}"),
            },
        );
        let (lo, hi, n) = self.qn_search;
        m.insert("qn_search", format!("{lo:?}, {hi:?}, {n}"));
        m.insert("qn_grid", fmt_list(&self.qn_grid));
        m.insert("sweep_q_dbm", format!("{:?}", self.sweep_q_dbm));
        m.insert("realizations", self.realizations.to_string());
        m.insert(
            "averaging",
            match self.averaging {
                Averaging::Fixed => "fixed".into(),
                Averaging::Average => "average".into(),
            },
        );
        m.insert("es_n0_db", fmt_list(&self.es_n0_db));
        m.insert("ser_symbols", self.ser_symbols.to_string());
        m.insert("ser_channels", self.ser_channels.to_string());
        m.insert("psd_frames", self.psd_frames.to_string());
        m.insert("psd_nfft", self.psd_nfft.to_string());
        m.insert("psd_oversampling", self.psd_oversampling.to_string());
        m.insert("psd_cell", self.psd_cell.to_string());
        m.insert("solver_eps", format!("{:?}", self.solver.eps));
        m.insert("solver_gap_tol", format!("{:?}", self.solver.gap_tol));
        m.insert("solver_max_iter", self.solver.max_iterations.to_string());
        let (kind, size) = match self.solver.step {
            StepRule::Spectral => ("spectral", None),
            StepRule::Diminishing(z) => ("diminishing", z),
            StepRule::Constant(z) => ("constant", Some(z)),
        };
        m.insert("solver_step", kind.into());
        if let Some(z) = size {
            m.insert("solver_step_size", format!("{z:?}"));
        }
        let mut out = String::new();
        for (k, v) in m {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Optimum `Q_n` values (watts) reported for the reference waveform at
/// `Q_r = Q_l = -20, -15, ..., 25` dBm.
const TABLE_QN_M5: [f64; 10] = [0.0022, 0.0044, 0.0155, 0.03, 0.07, 0.15, 0.34, 0.7, 1.435, 1.435];
const TABLE_QN_M15: [f64; 10] = [0.0133, 0.0233, 0.04, 0.091, 0.1933, 0.47, 1.02, 2.11, 2.11, 2.11];

/// Tabulated `Q_n` for `subsymbols` at `q_dbm`; levels above 25 dBm reuse
/// the last entry, where the power budget already binds.
pub fn table_qn(subsymbols: usize, q_dbm: f64) -> Result<f64> {
    let table = match subsymbols {
        5 => &TABLE_QN_M5,
        15 => &TABLE_QN_M15,
        m => return Err(Error::Config(format!("no tabulated Q_n for {m} subsymbols"))),
    };
    let pos = (q_dbm + 20.0) / 5.0;
    if pos < -1e-9 || (pos - pos.round()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "no tabulated Q_n at {q_dbm} dBm; the table covers -20:5:25"
        )));
    }
    Ok(table[(pos.round() as usize).min(table.len() - 1)])
}
