use std::path::PathBuf;

use thiserror::Error;

use crate::trace::HeadId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The input does not parse as the declared file format.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    /// The input parses but its content is inconsistent (missing or duplicate records, bad sizes).
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unknown head {0}")]
    UnknownHead(HeadId),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A combinatorial ceiling (coalition count, universe size, factorial blow-up) would be exceeded.
    #[error("guard violation: {0}")]
    Guard(String),

    #[error("table is missing coalition {0}")]
    MissingCoalition(String),

    #[error("sign convention error: {0}")]
    Convention(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Guard(_) => 3,
            Error::Invariant(_) => 4,
            _ => 2,
        }
    }
}
