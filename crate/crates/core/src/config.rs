//! Waveform and system parameters.

use crate::error::{Error, Result};

/// Prototype pulse family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    RaisedCosine,
    Rectangular,
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rc" | "raised-cosine" | "raised_cosine" | "raisedcosine" => Ok(Self::RaisedCosine),
            "rect" | "rectangular" => Ok(Self::Rectangular),
            other => Err(Error::Config(format!("unknown filter kind `{other}`"))),
        }
    }
}

/// Parameters of one GFDM (or OFDM, with `subsymbols == 1` and a
/// rectangular pulse) frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GfdmConfig {
    /// K
    pub subcarriers: usize,
    /// M
    pub subsymbols: usize,
    /// Cyclic prefix length in samples, one prefix per frame.
    pub cp_len: usize,
    /// Bits per square-QAM symbol.
    pub qam_bits: u32,
    pub rolloff: f64,
    /// Subsymbol duration in seconds.
    pub symbol_duration: f64,
    pub filter: FilterKind,
}

impl GfdmConfig {
    /// 16-QAM, raised cosine with roll-off 0.15, 64 subcarriers, CP of 10
    /// samples and 33.3 us subsymbols.
    pub fn reference(subsymbols: usize) -> Self {
        Self {
            subcarriers: 64,
            subsymbols,
            cp_len: 10,
            qam_bits: 4,
            rolloff: 0.15,
            symbol_duration: 33.3e-6,
            filter: FilterKind::RaisedCosine,
        }
    }

    /// Single-subsymbol rectangular waveform: plain OFDM with a CP per symbol.
    pub fn ofdm(subcarriers: usize, cp_len: usize) -> Self {
        Self {
            subcarriers,
            subsymbols: 1,
            cp_len,
            qam_bits: 4,
            rolloff: 0.0,
            symbol_duration: 33.3e-6,
            filter: FilterKind::Rectangular,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subcarriers < 2 {
            return Err(Error::Config(format!(
                "need at least 2 subcarriers, got {}",
                self.subcarriers
            )));
        }
        if self.subsymbols < 1 {
            return Err(Error::Config("need at least one subsymbol".into()));
        }
        if !(0.0..=1.0).contains(&self.rolloff) || !self.rolloff.is_finite() {
            return Err(Error::Config(format!(
                "roll-off {} outside [0, 1]",
                self.rolloff
            )));
        }
        if self.qam_bits == 0 || self.qam_bits % 2 != 0 || self.qam_bits > 16 {
            return Err(Error::Config(format!(
                "qam_bits must be a positive even number, got {}",
                self.qam_bits
            )));
        }
        if !(self.symbol_duration > 0.0) {
            return Err(Error::Config("symbol duration must be positive".into()));
        }
        if self.cp_len > self.frame_len() {
            return Err(Error::Config(format!(
                "cp_len {} exceeds frame length {}",
                self.cp_len,
                self.frame_len()
            )));
        }
        Ok(())
    }

    /// N = MK.
    pub fn frame_len(&self) -> usize {
        self.subcarriers * self.subsymbols
    }

    /// Average power of the unnormalized square QAM alphabet, 2(2^mu - 1)/3.
    pub fn mean_symbol_power(&self) -> f64 {
        2.0 * ((1u64 << self.qam_bits) as f64 - 1.0) / 3.0
    }

    /// Fraction of transmitted samples carrying data, MK / (MK + N_cp).
    pub fn rate_penalty(&self) -> f64 {
        let n = self.frame_len() as f64;
        n / (n + self.cp_len as f64)
    }

    /// Sample period T_s / K.
    pub fn sample_period(&self) -> f64 {
        self.symbol_duration / self.subcarriers as f64
    }

    /// Frequency offset of subcarrier `k` in subcarrier spacings,
    /// k - floor(K/2). Integer offsets keep every basis pulse periodic in
    /// the frame, so circular shifts by K samples map pulses onto pulses.
    pub fn subcarrier_offset(&self, k: usize) -> i64 {
        k as i64 - (self.subcarriers / 2) as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let c = GfdmConfig::reference(5);
        assert_eq!(c.frame_len(), 320);
        assert!((c.mean_symbol_power() - 10.0).abs() < 1e-15);
        assert!((c.rate_penalty() - 320.0 / 330.0).abs() < 1e-15);
        assert!((c.rate_penalty() - 0.9697).abs() < 1e-4);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_rolloff() {
        let mut c = GfdmConfig::reference(5);
        c.rolloff = 1.5;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.rolloff = -0.1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_odd_qam() {
        let mut c = GfdmConfig::reference(5);
        c.qam_bits = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn ofdm_preset() {
        let c = GfdmConfig::ofdm(64, 10);
        c.validate().unwrap();
        assert_eq!(c.frame_len(), 64);
        assert!((c.rate_penalty() - 64.0 / 74.0).abs() < 1e-15);
    }
}
