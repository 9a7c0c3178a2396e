use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid model at `{field}`: {reason}")]
    ModelLoad { field: String, reason: String },

    #[error("invalid mapping at `{field}`: {reason}")]
    Mapping { field: String, reason: String },

    #[error("invalid training setup: {0}")]
    TrainingConfig(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("invalid network document: {0}")]
    Network(String),

    #[error("frame mismatch: expected observation from `{expected}`, got `{actual}`")]
    FrameMismatch { expected: String, actual: String },

    #[error("acquisition order violated: {0}")]
    AcquisitionOrder(String),

    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },

    #[error("joint {joint} value {value} outside limits [{lower}, {upper}]")]
    OutOfLimits {
        joint: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("configuration collides at path parameter {fraction:.4} (links {links:?})")]
    PathCollision { fraction: f64, links: Vec<usize> },

    #[error("event `{event}` rejected in state {state}: {reason}")]
    Rejected {
        state: &'static str,
        event: &'static str,
        reason: &'static str,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn model(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ModelLoad {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }
}
