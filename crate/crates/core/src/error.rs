use std::path::PathBuf;

use thiserror::Error;

use crate::optimizer::OptimizationTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate orientation: {0}")]
    DegenerateOrientation(String),

    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("invalid rig: {0}")]
    InvalidRig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("ratio undefined: reference score is zero")]
    UndefinedRatio,

    #[error("scene out of range: {0}")]
    SceneOutOfRange(String),

    #[error("search aborted after {} trace rows: {source}", trace.rows.len())]
    Search {
        #[source]
        source: Box<Error>,
        trace: Box<OptimizationTrace>,
    },

    #[error("usage: {0}")]
    Usage(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
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

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for this error: 1 usage, 2 I/O, 3 format, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::InvalidArgument(_) | Error::SceneOutOfRange(_) => 1,
            Error::Io { .. } => 2,
            Error::Format { .. } | Error::DimensionMismatch(_) => 3,
            Error::Search { source, .. } => source.exit_code(),
            Error::DegenerateOrientation(_)
            | Error::BehindCamera { .. }
            | Error::NumericFailure(_)
            | Error::InvalidRig(_)
            | Error::UndefinedRatio => 4,
        }
    }
}
