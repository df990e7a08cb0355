use thiserror::Error;

/// Errors produced by the waveform, channel, analytics and allocation code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is numerically singular (reciprocal condition {rcond:.3e})")]
    Singular { rcond: f64 },

    #[error("deep fade: |H[{bin}]| = {magnitude:.3e} is below the equalizer floor")]
    DeepFade { bin: usize, magnitude: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("problem too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("solver diverged: {0}")]
    Diverged(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
