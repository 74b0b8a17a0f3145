use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The likelihood is exactly zero for these users (e.g. an opponent with
    /// recorded responses).
    #[error("zero likelihood for {} user(s): {}", .0.len(), .0.join(", "))]
    ZeroLikelihood(Vec<String>),

    #[error("no usable users remain after exclusions ({excluded} excluded)")]
    EmptyPopulation { excluded: usize },

    /// The optimizer stopped before meeting its tolerances.
    #[error("fit did not converge: {0}")]
    NotConverged(String),

    #[error("logistic fit failed: {0}")]
    Separation(String),

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by malformed input files or configuration.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::File { .. } | Error::Config(_) | Error::Io(_)
        )
    }
}
