use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Axis lengths, axis indices or sample lengths do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// The requested tree layout cannot be built.
    #[error("topology error: {0}")]
    Topology(String),

    /// The model is not in the state an operation requires, e.g. no
    /// canonical center.
    #[error("state error: {0}")]
    State(String),

    /// An argument is out of range or inconsistent.
    #[error("argument error: {0}")]
    Argument(String),

    /// A conditional or marginal distribution has zero total mass.
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    /// A training sample has exactly zero amplitude, so its log-likelihood
    /// gradient is undefined.
    #[error("training sample {index} has zero amplitude")]
    DegenerateSample { index: usize },

    /// A NaN or infinity showed up where finite values are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
