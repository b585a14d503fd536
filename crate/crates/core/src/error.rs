/// Unified error type for configuration, grid, and runtime failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite field value introduced at step {step} (t = {t:.6})")]
    NonFinite { step: usize, t: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("non-positive value where a positive one is required: {0}")]
    NonPositive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
