use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied something that violates an operation's preconditions.
    #[error("invalid input: {0}")]
    Input(String),

    /// Exhaustive search refused because the team is larger than the cap.
    #[error("capacity exceeded: {robots} robots exceeds the exhaustive-search cap of {cap}")]
    Capacity { robots: usize, cap: usize },

    #[error("no finite-cost path from {start:?} to {goal:?}")]
    Unreachable { start: (usize, usize), goal: (usize, usize) },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
