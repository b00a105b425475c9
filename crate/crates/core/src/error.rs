use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: &'static str, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite state at t = {t}; the step size is probably too large")]
    NonFiniteState { t: f64 },

    #[error("speed never exceeded the positivity floor before t = {max_time}")]
    ZeroSpeedStall { max_time: f64 },

    #[error("no progress: two consecutive cycles reduced the gap by less than {threshold:e} (relative) at t = {t}")]
    NoProgress { t: f64, threshold: f64 },

    #[error("no sign change of {function} found on ({lo:e}, {hi:e}]; parameters look pathological")]
    BracketFailure {
        function: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contraction factor Q = {q} is outside (0, 1); check the mu and L inputs")]
    InvalidContraction { q: f64 },

    #[error("non-finite iterate at k = {k}; the step size h is probably too large")]
    NonFiniteIterate { k: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty input")]
    EmptyInput,

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            message: message.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user configuration rather than by a failed run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidParameter { .. } | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
