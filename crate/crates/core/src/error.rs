use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// API misuse, e.g. a stale activation tape.
    #[error("usage error: {0}")]
    Usage(String),

    /// Input data failed validation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("user {0} has an empty content history")]
    EmptyHistory(String),

    #[error("audience group is empty")]
    EmptyAudience,

    #[error("AUC is undefined: labels contain a single class")]
    AucUndefined,

    #[error("zero-norm embedding: {0}")]
    ZeroNorm(String),

    #[error("cannot split dataset into disjoint train/test sets: {0}")]
    Split(String),

    #[error("remote call failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("remote service refused the request: {0}")]
    Refused(String),

    #[error("remote service not configured: {0}")]
    Unconfigured(String),

    #[error("missing artifact {}: {hint}", path.display())]
    MissingArtifact { path: PathBuf, hint: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            got,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
