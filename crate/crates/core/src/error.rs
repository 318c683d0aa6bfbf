use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {column} has norm {norm}, expected 1")]
    NonUnitColumns { column: usize, norm: f64 },

    #[error("stride {stride} with {spatial} shifts does not tile {rows} rows")]
    IncompatibleStride {
        stride: usize,
        spatial: usize,
        rows: usize,
    },

    #[error("coherence needs at least two columns")]
    SingleColumn,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("alpha must be 0 or 2, got {0}")]
    InvalidAlpha(u32),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("matrix has no columns")]
    EmptyMatrix,

    #[error("layer {layer} constraints not met after {retries} attempts (column {column})")]
    ConstraintUnsatisfiable {
        layer: usize,
        column: usize,
        retries: usize,
    },

    #[error("k = {k} out of range for vector of length {len}")]
    KOutOfRange { k: usize, len: usize },

    #[error("layer {layer}: zeta_prev {found} disagrees with recursion value {expected}")]
    ChainMismatch {
        layer: usize,
        expected: f64,
        found: f64,
    },

    #[error("coherence is zero; admissible sparsity is unbounded")]
    ZeroCoherence,

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
