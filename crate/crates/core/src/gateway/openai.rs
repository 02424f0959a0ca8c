//! OpenAI-compatible HTTP transport.

use std::time::Duration;

use serde_json::{json, Value};

use super::{
    ChatBackend, ChatMessage, Completion, CompletionRequest, GatewayError, ProviderConfig, Role,
    TokenUsage,
};

/// Setting this environment variable to `1` makes every live call fail
/// immediately.
pub const NO_NETWORK_ENV: &str = "NO_NETWORK";

pub(crate) fn network_disabled() -> bool {
    std::env::var(NO_NETWORK_ENV).map(|v| v.trim() == "1").unwrap_or(false)
}

/// Exponential backoff between retries: `initial * 2^n`, capped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backoff {
    pub initial: Duration,
    pub cap: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            initial: Duration::from_secs(1),
            cap: Duration::from_secs(30),
        }
    }
}

impl Backoff {
    pub fn none() -> Self {
        Self {
            initial: Duration::ZERO,
            cap: Duration::ZERO,
        }
    }

    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(31)).unwrap_or(u32::MAX);
        self.initial.saturating_mul(factor).min(self.cap)
    }
}

/// Blocking JSON POST with retries, shared by chat and embedding clients.
#[derive(Debug, Clone)]
pub(crate) struct HttpTransport {
    config: ProviderConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    backoff: Backoff,
}

impl HttpTransport {
    pub(crate) fn new(config: ProviderConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let api_key = config.resolve_api_key()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        Ok(Self {
            config,
            client,
            api_key,
            backoff: Backoff::default(),
        })
    }

    pub(crate) fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub(crate) fn set_backoff(&mut self, backoff: Backoff) {
        self.backoff = backoff;
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    /// POSTs `body` to `<endpoint>/<path>`. Transport failures and 429/5xx
    /// responses are retried; at most `retry_limit + 1` requests are sent.
    pub(crate) fn post_json(&self, path: &str, body: &Value) -> Result<(Value, u32), GatewayError> {
        if network_disabled() {
            return Err(GatewayError::NetworkDisabled);
        }
        let max_attempts = self.config.retry_limit + 1;
        let url = self.url(path);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut req = self.client.post(&url).json(body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let outcome = req.send().and_then(|resp| {
                let status = resp.status();
                resp.text().map(|text| (status, text))
            });
            let retryable_err = match outcome {
                Ok((status, text)) if status.is_success() => {
                    let value: Value = serde_json::from_str(&text)
                        .map_err(|e| GatewayError::InvalidResponse(format!("{e}: {text}")))?;
                    return Ok((value, attempt));
                }
                Ok((status, text)) => {
                    let err = GatewayError::Provider {
                        status: status.as_u16(),
                        body: text,
                    };
                    if !(status.as_u16() == 429 || status.is_server_error()) {
                        return Err(err);
                    }
                    err
                }
                Err(e) => GatewayError::Transport {
                    attempts: attempt,
                    message: e.to_string(),
                },
            };
            if attempt >= max_attempts {
                return Err(match retryable_err {
                    GatewayError::Transport { message, .. } => GatewayError::Transport {
                        attempts: attempt,
                        message,
                    },
                    other => other,
                });
            }
            log::warn!("{url}: attempt {attempt}/{max_attempts} failed: {retryable_err}");
            std::thread::sleep(self.backoff.delay(attempt - 1));
        }
    }
}

/// Chat-completion client for any OpenAI-compatible endpoint.
#[derive(Debug, Clone)]
pub struct OpenAiBackend {
    transport: HttpTransport,
}

impl OpenAiBackend {
    pub fn new(config: ProviderConfig) -> Result<Self, GatewayError> {
        Ok(Self {
            transport: HttpTransport::new(config)?,
        })
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.transport.set_backoff(backoff);
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        self.transport.config()
    }

    /// Sends `prompt` as the single user message of a fresh conversation.
    pub fn complete(&self, prompt: &str) -> Result<Completion, GatewayError> {
        self.complete_messages(&[], prompt)
    }

    pub fn complete_messages(
        &self,
        history: &[ChatMessage],
        prompt: &str,
    ) -> Result<Completion, GatewayError> {
        if prompt.trim().is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        let mut messages: Vec<Value> = history
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({ "role": role, "content": m.content })
            })
            .collect();
        messages.push(json!({ "role": "user", "content": prompt }));
        let config = self.transport.config();
        let body = json!({
            "model": config.model_name,
            "messages": messages,
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
        });
        let (value, attempts) = self.transport.post_json("chat/completions", &body)?;
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::InvalidResponse(format!("no message content in {value}")))?;
        if text.is_empty() {
            return Err(GatewayError::EmptyCompletion);
        }
        let usage = TokenUsage {
            prompt_tokens: value.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
            completion_tokens: value
                .pointer("/usage/completion_tokens")
                .and_then(Value::as_u64)
                .unwrap_or(0),
        };
        Ok(Completion {
            text: text.to_string(),
            usage,
            attempts,
        })
    }
}

impl ChatBackend for OpenAiBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, GatewayError> {
        self.complete_messages(request.history, request.prompt)
    }
}
