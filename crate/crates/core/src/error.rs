use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time series of length {len} too short for embedding dimension {dim} with delay {delay}")]
    SeriesTooShort { len: usize, dim: usize, delay: usize },

    #[error("filtration is not sorted at position {0}")]
    UnsortedFiltration(usize),

    #[error("subsample size {size} exceeds cloud size {available}")]
    SubsampleTooLarge { size: usize, available: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
