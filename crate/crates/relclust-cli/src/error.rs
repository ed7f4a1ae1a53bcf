use std::path::PathBuf;

use thiserror::Error;

/// A type alias for `Result<T, Error>`.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the command-line layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: cannot parse '{field}'")]
    Parse { path: PathBuf, line: usize, field: String },

    #[error("{path}:{line}: row has {got} entries, expected {expected}")]
    RaggedRows { path: PathBuf, line: usize, got: usize, expected: usize },

    #[error("invalid parameters: {0}")]
    BadParameters(String),

    #[error(transparent)]
    Core(#[from] relclust::Error),
}
