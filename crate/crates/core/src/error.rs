use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate filterbank: {0}")]
    DegenerateFilterbank(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("manifest validation failed:\n  {}", .0.join("\n  "))]
    Manifest(Vec<String>),

    #[error("failed to ingest {path}: {reason}")]
    Ingest { path: PathBuf, reason: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
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

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user-supplied configuration or data
    /// layout (as opposed to failures while processing).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidConfig(_)
            | Error::Manifest(_)
            | Error::Stratification(_)
            | Error::Domain(_) => true,
            Error::Context { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    /// Process exit code for the command line tool: 2 for validation
    /// failures, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            2
        } else {
            3
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.context(context()))
    }
}
