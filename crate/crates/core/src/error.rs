use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("scene generation failed: {0}")]
    GenerationFailure(String),

    #[error("episode sampling failed: only {available} valid starts for {requested} episodes")]
    SamplingFailure { requested: usize, available: usize },

    #[error("goal category `{0}` does not occur in the scene")]
    MissingGoal(String),

    #[error("profile `{0}` not found")]
    ProfileNotFound(String),

    #[error("profile `{name}` has kind {actual}, expected {expected}")]
    KindMismatch {
        name: String,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("VRAM budget exceeded: {total_mib} MiB > {budget_mib} MiB")]
    BudgetExceeded { total_mib: u64, budget_mib: u64 },

    #[error("empty input")]
    EmptyInput,

    #[error("episode lists do not match: {0}")]
    MismatchedEpisodes(String),

    #[error("unknown config `{0}`")]
    UnknownConfig(String),

    #[error("malformed {what}: {msg}")]
    Parse { what: &'static str, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Parse {
            what,
            msg: msg.into(),
        }
    }
}
