use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::GatewayError;

pub const DEFAULT_TEMPERATURE: f64 = 0.5;
pub const DEFAULT_MAX_TOKENS: u32 = 1000;
pub const MAX_RETRY_LIMIT: u32 = 10;

/// Connection settings for one OpenAI-compatible provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Base URL; `/chat/completions` and `/embeddings` are appended.
    pub endpoint: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key. The key itself
    /// is never read from configuration files.
    pub api_key_ref: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retry_limit: u32,
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1".to_string(),
            model_name: "qwen1.5-72b-chat".to_string(),
            api_key_ref: "OPENAI_API_KEY".to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            retry_limit: 3,
            timeout_secs: 120,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::Config(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::Config("max_tokens must be at least 1".into()));
        }
        if self.retry_limit > MAX_RETRY_LIMIT {
            return Err(GatewayError::Config(format!(
                "retry_limit {} exceeds {MAX_RETRY_LIMIT}",
                self.retry_limit
            )));
        }
        if self.endpoint.trim().is_empty() {
            return Err(GatewayError::Config("endpoint is empty".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    /// True unless the endpoint host is a loopback address.
    pub fn is_remote(&self) -> bool {
        let rest = self
            .endpoint
            .split_once("://")
            .map(|(_, r)| r)
            .unwrap_or(&self.endpoint);
        let authority = rest.split('/').next().unwrap_or("");
        let host = if let Some(stripped) = authority.strip_prefix('[') {
            stripped.split(']').next().unwrap_or("")
        } else {
            authority.split(':').next().unwrap_or("")
        };
        !matches!(host, "localhost" | "127.0.0.1" | "::1" | "0.0.0.0")
    }

    /// Reads the API key from the environment. Missing keys are an error only
    /// for remote endpoints.
    pub fn resolve_api_key(&self) -> Result<Option<String>, GatewayError> {
        if self.api_key_ref.is_empty() {
            return if self.is_remote() {
                Err(GatewayError::Config("remote endpoint requires api_key_ref".into()))
            } else {
                Ok(None)
            };
        }
        match std::env::var(&self.api_key_ref) {
            Ok(key) if !key.is_empty() => Ok(Some(key)),
            _ if self.is_remote() => Err(GatewayError::Config(format!(
                "environment variable {} is not set",
                self.api_key_ref
            ))),
            _ => Ok(None),
        }
    }
}
