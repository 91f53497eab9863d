use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("path diverged at step {step} (stream {stream_id})")]
    DivergedPath { step: usize, stream_id: u64 },

    #[error("estimator failed: {diverged} of {total} paths diverged (limit 0.1%)")]
    TooManyDiverged { diverged: usize, total: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported dimension {0}: operation requires d = 1")]
    UnsupportedDimension(usize),

    #[error("drift family `{0}` does not provide a translation modulus K(t)")]
    MissingModulus(&'static str),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("check `{check}` failed: {source}")]
    CheckFailed {
        check: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
