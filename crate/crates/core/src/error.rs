use thiserror::Error;

/// Errors raised by the lab's geometry, samplers, and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid coordinate {value} on axis {axis}")]
    InvalidCoordinate { axis: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cube interior is degenerate: shell {shell} leaves no interior in a cube of side {side}")]
    DegenerateInterior { shell: f64, side: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl LabError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
