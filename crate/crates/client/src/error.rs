//! Client-side error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },

    #[error("malformed endpoint response: {0}")]
    BadResponse(String),

    #[error("template {template:?}: unbound placeholder <{placeholder}>")]
    UnboundPlaceholder {
        template: String,
        placeholder: String,
    },

    #[error("unknown template id {0:?}")]
    UnknownTemplate(String),

    #[error("auth environment variable {0:?} is not set")]
    MissingAuth(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Core(#[from] rabbi_core::Error),

    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl ClientError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        ClientError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
