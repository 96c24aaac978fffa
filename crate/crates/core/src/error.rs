use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no grid node lies strictly inside the domain at N = {n}")]
    EmptyDomain { n: usize },

    #[error("cell ({i}, {j}) has {sign_changes} sign changes of the level set; only single cuts are supported")]
    UnsupportedCut {
        i: usize,
        j: usize,
        sign_changes: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("entropy generator evaluated outside its domain at p = {p}")]
    EntropyDomain { p: f64 },

    #[error("linear solver failed: {reason} (relative residual {residual:e})")]
    Solver { reason: String, residual: f64 },

    #[error("non-finite value in the conductivity field at step {step}")]
    NonFinite { step: usize },

    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user-supplied configuration rather than by the
    /// numerics or the filesystem.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidArgument(_))
    }
}
