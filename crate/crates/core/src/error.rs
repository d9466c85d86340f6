use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a shape, width or argument contract.
    #[error("specification error: {0}")]
    Spec(String),
    /// A physical quantity fell outside its valid operating range.
    #[error("range error: {0}")]
    Range(String),
    /// The simulator produced a non-finite state.
    #[error("simulation fault: {0}")]
    Fault(String),
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::Spec(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid user input rather than runtime faults.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Spec(_) | Error::Config { .. } | Error::Version { .. } | Error::Parse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
