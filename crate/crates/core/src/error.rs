use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong inside the toolkit.
///
/// Variants are grouped by the exit code the command line maps them to:
/// validation problems (2), data problems (3) and numerical problems (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("{path}: {reason}")]
    Load { path: PathBuf, reason: String },

    #[error("{0}")]
    Schema(String),

    #[error("label normalization failed: sample '{sample_id}' has an all-zero row")]
    Normalization { sample_id: String },

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("fusion failed: {0}")]
    Fusion(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("no runs found in {0}")]
    NoRuns(PathBuf),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("grid search failed: every configuration errored ({0})")]
    Search(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn load(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 usage/validation, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid { .. } => 2,
            Error::Divergence(_) | Error::Search(_) => 4,
            _ => 3,
        }
    }
}
