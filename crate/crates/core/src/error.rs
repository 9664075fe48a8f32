use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("not a KVT1 file (bad magic {0:02x?})")]
    BadMagic([u8; 4]),

    #[error("truncated KVT1 payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("KVT1 extents overflow the address space: {0:?}")]
    ExtentOverflow(Vec<u64>),

    #[error("corrupted quantized block: {0}")]
    CorruptBlock(String),

    #[error("store has no residual landmarks")]
    ResidualsAbsent,

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("grid point [{point}] failed")]
    GridPoint { point: String, source: Box<Error> },

    #[error("{path}")]
    Path { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn at_path(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Error::Path { path, source }
    }
}
