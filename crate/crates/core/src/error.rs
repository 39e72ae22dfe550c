use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("model uses {used} features, more than the exact Shapley limit of {limit}; sub-sample features or rows")]
    TooManyFeatures { used: usize, limit: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("serialization: {0}")]
    Serde(String),

    #[error("missing artifact {path}; run the `{producer}` stage first")]
    MissingArtifact { path: PathBuf, producer: String },

    #[error("run directory {0} is locked by another process (remove the lock file if that process is gone)")]
    Locked(PathBuf),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// Configuration problems as opposed to failures while doing work.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidConfig(_) | Error::UnknownFeature(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
