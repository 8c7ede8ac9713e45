use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("task index {task} out of range for {tasks} task(s)")]
    TaskOutOfRange { task: usize, tasks: usize },

    #[error("unknown task '{0}': the model was not trained on this rumour")]
    UnknownTask(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite (after jitter escalation to {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("negative predictive variance {0:e}")]
    NegativeVariance(f64),

    #[error("evidence evaluation failed at every point ({} attempts); first failing parameters: {:?}", .failures.len(), .failures.first())]
    OptimizationFailed { failures: Vec<Vec<f64>> },

    #[error("model format: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures of the numerical machinery as opposed to bad data or usage.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::NegativeVariance(_) | Error::OptimizationFailed { .. }
        )
    }
}
