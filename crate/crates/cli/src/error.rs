//! CLI failure classification onto the exit-code contract:
//! 0 success, 1 validation/input error, 2 collection failure over
//! threshold, 3 internal error.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("collection failure rate exceeded the threshold: {0}")]
    Collection(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Collection(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

// Domain errors from the library crates are input/data problems.
impl From<rabbi_core::Error> for CliError {
    fn from(e: rabbi_core::Error) -> Self {
        match e {
            rabbi_core::Error::Serialize(inner) => CliError::Internal(inner.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<rabbi_client::ClientError> for CliError {
    fn from(e: rabbi_client::ClientError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
