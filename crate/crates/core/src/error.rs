use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear solver failure: {message} (relative residual {residual:e})")]
    SolverFailure { message: String, residual: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last relative increment {increment:e})")]
    NonConvergence { iterations: usize, increment: f64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
