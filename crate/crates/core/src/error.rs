use thiserror::Error;

pub type Result<T> = std::result::Result<T, SdiError>;

#[derive(Debug, Error)]
pub enum SdiError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point {value} lies outside [{lo}, {hi}] in dimension {dim}")]
    OutOfDomain { dim: usize, value: f64, lo: f64, hi: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("coefficient set is invalid (ensemble hit a guard or produced non-finite values)")]
    InvalidCoefficients,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SdiError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SdiError::InvalidInput(msg.into())
    }
}
