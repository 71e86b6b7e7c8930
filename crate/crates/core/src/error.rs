use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A non-finite intermediate showed up in message passing.
    #[error("non-finite value in {context}; retry with the log-domain message update")]
    NonFinite { context: &'static str },

    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0} is undefined for this state")]
    Undefined(&'static str),

    #[error("invalid inference state: {0}")]
    InvalidState(String),

    #[error("marginals were not retained for q = {0}")]
    MissingMarginals(usize),

    #[error("serialization failed: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::EmptyGraph | Error::Serialization(_) => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
