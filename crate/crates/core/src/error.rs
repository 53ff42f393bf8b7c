use thiserror::Error;

/// Errors raised by the optimizer library and its harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("SVD failed to converge after {iterations} iterations")]
    SvdNotConverged { iterations: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("non-finite gradient in parameter {param} at flat index {index} (value {value})")]
    NonFiniteGradient {
        param: usize,
        index: usize,
        value: f64,
    },

    #[error("frame kind {0:?} needs a reference gradient")]
    MissingReferenceGradient(crate::linalg::FrameKind),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        got: impl ToString,
    ) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
