use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("derivative degeneracy: {0}")]
    DerivativeDegeneracy(String),
    #[error("ill-posed cubic: {0}")]
    IllPosedCubic(String),
    #[error("solver diverged at iterate {iteration}: non-finite value")]
    Divergence { iteration: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("degenerate image: {0}")]
    DegenerateImage(String),
    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),
    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedImage { path: PathBuf, reason: String },
    #[error("all {0} grid points failed")]
    AllGridPointsFailed(usize),
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
