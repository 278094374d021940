use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Stream(#[from] io::Error),

    #[error("{malformed} of {total} rows malformed (first at line {first_line})")]
    Format {
        malformed: usize,
        total: usize,
        first_line: u64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("empty window: {0}")]
    EmptyWindow(String),

    #[error("records span several markets ({0}); partition by market first")]
    MixedMarkets(String),

    #[error("unknown destination `{0}`")]
    UnknownDestination(String),

    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),

    #[error("period {period} has no accuracy for measure `{measure}`")]
    MissingMeasure { period: usize, measure: String },

    #[error("malformed matrix file {path}: {reason}")]
    MatrixFile { path: PathBuf, reason: String },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 internal, 2 input, 3 domain.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnknownDestination(_) | Error::UnknownMeasure(_) => 3,
            Error::Io { .. }
            | Error::Stream(_)
            | Error::Format { .. }
            | Error::Argument(_)
            | Error::EmptyWindow(_)
            | Error::MixedMarkets(_)
            | Error::MatrixFile { .. }
            | Error::Csv(_) => 2,
            Error::MissingMeasure { .. } | Error::Json(_) => 1,
        }
    }
}
