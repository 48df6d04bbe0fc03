use thiserror::Error;

/// Errors raised by the tensor algebra, the cross approximation and the solvers.
#[derive(Debug, Error)]
pub enum SlarError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("index {index} out of range for mode {mode} of size {size}")]
    OutOfBounds { mode: usize, index: usize, size: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dense reconstruction of {entries} entries exceeds the cap of {cap}")]
    SizeCap { entries: u128, cap: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("malformed tensor container: {0}")]
    Format(String),
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<SlarError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = SlarError> = std::result::Result<T, E>;
