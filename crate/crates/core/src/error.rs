use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A CEG could not be built or traversed because the catalogue lacks a statistic.
    #[error("missing statistic: {0}")]
    MissingStatistic(String),

    #[error("top vertex unreachable: {0}")]
    Unreachable(String),

    #[error("path enumeration exceeded the cap of {cap} paths")]
    EnumerationOverflow { cap: usize },

    #[error("bound sketch: {0}")]
    Sketch(String),

    #[error("catalogue version mismatch: found {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("malformed catalogue: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
