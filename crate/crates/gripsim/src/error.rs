use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate force vector: magnitude {magnitude} N is below epsilon {epsilon} N")]
    DegenerateVector { magnitude: f64, epsilon: f64 },

    #[error("empty trace: duration {duration} s is shorter than one sample period")]
    EmptyTrace { duration: f64 },

    #[error("invalid sweep range: {0}")]
    InvalidSweep(String),

    #[error("window length {got} does not match spec length {want}")]
    WindowLength { got: usize, want: usize },

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("{path}: {source}")]
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

    /// Machine-parsable error category, also used as the CLI exit code.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            _ => "invariant",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
