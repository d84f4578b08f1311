use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("no interactions")]
    NoInteractions,

    #[error("filter too aggressive: no users or repositories survive")]
    FilterTooAggressive,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient for parameter {param}")]
    NonFiniteGradient { param: String },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("catalog of {catalog} repositories is too small to draw {requested} negatives")]
    CatalogTooSmall { catalog: usize, requested: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config hash mismatch in {artifact}: expected {expected}, found {found}")]
    HashMismatch {
        artifact: String,
        expected: String,
        found: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Whether the error stems from bad input or configuration (as opposed to
    /// a failure while computing).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::NoInteractions
                | Error::FilterTooAggressive
                | Error::Config(_)
                | Error::HashMismatch { .. }
                | Error::CatalogTooSmall { .. }
        )
    }
}
