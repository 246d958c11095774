use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}: parse error at {message}")]
    Parse { file: String, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unknown instance `{0}`")]
    UnknownInstance(String),

    #[error("need at least 2 samples, got {0}")]
    InsufficientSamples(usize),

    #[error("denoising removed every sample")]
    EmptyRelation,

    #[error("no pairwise relation from `{dominant}` to `{secondary}`")]
    UnsatisfiableKey { dominant: String, secondary: String },

    #[error("invalid hyper key `{0}`")]
    InvalidKey(String),

    #[error("corrupt prior file {location} for key `{key}`: {reason}")]
    Integrity {
        key: String,
        location: String,
        reason: String,
    },

    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
