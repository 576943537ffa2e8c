use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{op} is not available for model {model}")]
    Unsupported { op: &'static str, model: String },

    /// Malformed input data, located by 1-based row and column.
    #[error("data error at row {row}, column {column}: {message}")]
    Data {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("aggregation failed: {0}")]
    Aggregation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line driver: 1 for usage-level
    /// problems, 2 for data, fit and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Unsupported { .. } => 1,
            _ => 2,
        }
    }
}
