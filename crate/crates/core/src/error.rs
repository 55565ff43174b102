//! Error types shared across the engine.

use thiserror::Error;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input data or configuration.
    Validation,
    /// Backend transport, timeout, or protocol failure.
    Backend,
    /// Everything else (I/O, logic invariants).
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("generation failed at stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse(_) | Error::Validation(_) | Error::Config(_) => ErrorClass::Validation,
            Error::Backend(_) => ErrorClass::Backend,
            Error::Stage { source, .. } => source.class(),
            Error::Io { .. } | Error::Internal(_) => ErrorClass::Internal,
        }
    }

    /// Wrap an error with the pipeline stage it occurred in.
    pub fn at_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Failures raised by a text/embedding backend.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),

    #[error("request timed out after {0}s")]
    Timeout(u64),

    #[error("backend returned an empty reply")]
    EmptyReply,

    #[error("no mock rule matches the request")]
    NoRule,

    #[error("cannot embed empty text")]
    EmptyText,

    #[error("malformed backend response: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;
