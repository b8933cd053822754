//! Endpoint configuration.

use serde::{Deserialize, Serialize};

use crate::error::{ClientError, Result};

/// How to reach and drive a chat-completion endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL up to but not including `/chat/completions`.
    pub base_url: String,
    /// Model identifier sent with every request.
    pub model: String,
    /// Name of the environment variable holding the bearer token; no
    /// auth header is sent when absent.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
    /// Additional attempts after the first failure.
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub retry_backoff_ms: u64,
    /// Deterministic decoding by default; pairwise consistency
    /// statistics assume reproducible per-order outputs.
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_top_logprobs")]
    pub top_logprobs: u8,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_timeout_secs() -> u64 {
    60
}
fn default_parallel() -> usize {
    4
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_top_logprobs() -> u8 {
    20
}
fn default_max_tokens() -> u32 {
    16
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            auth_env: None,
            timeout_secs: default_timeout_secs(),
            max_parallel: default_parallel(),
            retries: default_retries(),
            retry_backoff_ms: default_backoff_ms(),
            temperature: 0.0,
            top_logprobs: default_top_logprobs(),
            max_tokens: default_max_tokens(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_secs == 0 {
            return Err(ClientError::InvalidConfig("timeout must be > 0".into()));
        }
        if self.max_parallel == 0 {
            return Err(ClientError::InvalidConfig(
                "max_parallel must be >= 1".into(),
            ));
        }
        if self.base_url.is_empty() {
            return Err(ClientError::InvalidConfig("empty base_url".into()));
        }
        Ok(())
    }

    /// Resolves the bearer token, if auth is configured.
    pub fn auth_token(&self) -> Result<Option<String>> {
        match &self.auth_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| ClientError::MissingAuth(var.clone())),
        }
    }
}
