use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("step {t} out of range [0, {max}]")]
    StepOutOfRange { t: usize, max: usize },

    #[error("reverse step requires t >= 1")]
    InvalidStep,

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown {kind} `{name}`")]
    Lookup { kind: &'static str, name: String },

    #[error("non-finite value at step {step} (seed {seed})")]
    NumericFailure { seed: u64, step: usize },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("degenerate contingency table: {0}")]
    DegenerateTable(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
