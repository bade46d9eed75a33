use thiserror::Error;

/// Errors produced anywhere in the compression pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// More than two cells share one facet.
    #[error("non-manifold facet {facet:?} shared by {count} cells")]
    NonManifold { facet: Vec<usize>, count: usize },

    #[error("cell {cell} is degenerate")]
    DegenerateCell { cell: usize },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("corrupt stream at byte {position}: {reason}")]
    CorruptStream { position: usize, reason: String },

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),

    #[error("payload was compressed against a different mesh (digest mismatch)")]
    DigestMismatch,

    #[error("unsupported mesh: {0}")]
    UnsupportedMesh(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn corrupt(position: usize, reason: impl Into<String>) -> Self {
        Error::CorruptStream {
            position,
            reason: reason.into(),
        }
    }
}
