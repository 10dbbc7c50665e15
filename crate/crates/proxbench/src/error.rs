use thiserror::Error;

/// Errors shared across the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("operation requires d=2 (complex) blocks, got d={0}")]
    NotComplex(usize),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("incompatible constraint set: {0}")]
    IncompatibleSet(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dataset format error: {0}")]
    DatasetFormat(String),

    #[error("missing ground truth (required for success evaluation)")]
    MissingTruth,

    #[error("algorithm failure: {0}")]
    AlgorithmFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape_mismatch(expected: impl std::fmt::Display, got: impl std::fmt::Display) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
