//! Crate-wide error type and result alias.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameter combination supplied by the caller.
    #[error("invalid config: {0}")]
    Config(String),

    /// Malformed input values (empty queries, bad spans, shape mismatches).
    #[error("invalid input: {0}")]
    Input(String),

    /// Sample id not present in the dataset.
    #[error("unknown id {0}")]
    UnknownId(u64),

    /// Sample id already present in the dataset.
    #[error("duplicate id {0}")]
    DuplicateId(u64),

    /// Corrupt or inconsistent on-disk container.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// Pipeline precondition failure (eligibility, partner pool, strict mode).
    #[error("pipeline error: {0}")]
    Pipeline(String),

    /// Probe training or evaluation failure.
    #[error("probe error: {0}")]
    Probe(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable process exit code: 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Input(_)
            | Error::UnknownId(_)
            | Error::DuplicateId(_)
            | Error::Dataset(_)
            | Error::Pipeline(_)
            | Error::Probe(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
        }
    }
}
