use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("exact rotation requested for {n_atoms} atoms, above the exact-mode cap of {cap}; use the Holstein-Primakoff formulas instead")]
    ExactModeCap { n_atoms: u64, cap: u64 },

    #[error("probability of exactly one click vanishes for these parameters")]
    ZeroClickProbability,

    #[error("quadrature did not converge: last change {last_change:e} after {panels} panels per axis")]
    NonConvergence { panels: usize, last_change: f64 },

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("window of {window} samples does not fit a series of length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("design matrix is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("dataset schema mismatch: missing columns [{}]", missing.join(", "))]
    SchemaMismatch { missing: Vec<String> },

    #[error("malformed dataset at line {line}: {reason}")]
    MalformedRecord { line: u64, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
