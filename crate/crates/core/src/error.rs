use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// A model or configuration value violates its documented bounds.
    #[error("invalid value for `{key}`: {reason}")]
    Invariant { key: String, reason: String },

    /// Input data (frames, tables, fields) is malformed.
    #[error("invalid input: {0}")]
    Input(String),

    /// No physical all-pass ring reproduces the requested figures of merit.
    #[error("no ring solution: {0}")]
    NoSolution(String),

    /// A spectrum fit could not be completed.
    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("cannot read `{path}`: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write `{path}`: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("syntax error in `{path}`: {message}")]
    Syntax { path: PathBuf, message: String },

    /// Keys not recognised by the configuration schema (strict mode).
    #[error("unknown configuration key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
}

impl Error {
    pub(crate) fn invariant(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invariant {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
