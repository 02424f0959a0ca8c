//! Stateless access to chat-completion and embedding providers.
//!
//! A [`Gateway`] renders a catalog template, hands the prompt to a
//! [`ChatBackend`] and records the exchange in a shared [`CallTrace`].
//! Backends are either live ([`OpenAiBackend`]) or scripted
//! ([`ScriptedBackend`], [`ResponderBackend`]) so that whole pipeline runs can
//! be replayed offline.

mod config;
mod embedding;
mod openai;
pub mod prompts;
mod scripted;
mod template;
mod trace;

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ProviderConfig, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE, MAX_RETRY_LIMIT};
pub use embedding::{
    cosine_similarity, Embedder, EmbeddingBackend, EmbeddingVector, HashEmbedder, HttpEmbedder,
};
pub use openai::{Backoff, OpenAiBackend, NO_NETWORK_ENV};
pub use prompts::PromptCatalog;
pub use scripted::{scripted_complete, FixtureRecord, ReplayFixture, ResponderBackend, ScriptedBackend};
pub use template::{
    binding_digest, bindings, placeholders, render_template, text_digest, Bindings, PromptTemplate,
    TemplateError,
};
pub use trace::{CallKind, CallLedger, CallTrace, ChatExchange, TokenUsage, TraceEntry};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("no template `{0}` in the catalog")]
    UnknownTemplate(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned status {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("provider returned an empty completion")]
    EmptyCompletion,
    #[error("no fixture entry for template `{template_id}` with digest {digest}")]
    FixtureMiss { template_id: String, digest: String },
    #[error("embedding dimension changed from {expected} to {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("live provider call refused: {NO_NETWORK_ENV}=1")]
    NetworkDisabled,
    #[error("malformed provider response: {0}")]
    InvalidResponse(String),
    #[error("invalid provider configuration: {0}")]
    Config(String),
    #[error("invalid fixture: {0}")]
    Fixture(String),
    #[error("empty input text")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

/// A bounded window of previous (prompt, completion) rounds.
///
/// Only used when the knowledge-graph memory is disabled; memory-backed runs
/// send every prompt without history.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatHistory {
    max_rounds: usize,
    rounds: VecDeque<(String, String)>,
}

impl ChatHistory {
    pub fn new(max_rounds: usize) -> Self {
        Self {
            max_rounds,
            rounds: VecDeque::new(),
        }
    }

    pub fn push(&mut self, prompt: impl Into<String>, completion: impl Into<String>) {
        if self.max_rounds == 0 {
            return;
        }
        if self.rounds.len() == self.max_rounds {
            self.rounds.pop_front();
        }
        self.rounds.push_back((prompt.into(), completion.into()));
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        self.rounds
            .iter()
            .flat_map(|(p, c)| {
                [
                    ChatMessage { role: Role::User, content: p.clone() },
                    ChatMessage { role: Role::Assistant, content: c.clone() },
                ]
            })
            .collect()
    }
}

/// Everything a backend may key its answer on.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub template_id: &'a str,
    pub bindings: &'a Bindings,
    pub digest: &'a str,
    pub prompt: &'a str,
    pub history: &'a [ChatMessage],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
    pub attempts: u32,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, GatewayError>;
}

/// Shareable chat handle: template catalog + backend + trace.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    catalog: Arc<PromptCatalog>,
    trace: CallTrace,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("templates", &self.catalog.ids().count())
            .field("calls", &self.trace.len())
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, catalog: PromptCatalog, trace: CallTrace) -> Self {
        Self {
            backend,
            catalog: Arc::new(catalog),
            trace,
        }
    }

    /// Gateway over the builtin catalog with a fresh trace.
    pub fn with_backend(backend: impl ChatBackend + 'static) -> Self {
        Self::new(Arc::new(backend), PromptCatalog::builtin(), CallTrace::new())
    }

    pub fn trace(&self) -> &CallTrace {
        &self.trace
    }

    pub fn catalog(&self) -> &PromptCatalog {
        &self.catalog
    }

    pub fn render(&self, template_id: &str, bindings: &Bindings) -> Result<String, GatewayError> {
        let template = self
            .catalog
            .get(template_id)
            .ok_or_else(|| GatewayError::UnknownTemplate(template_id.to_string()))?;
        Ok(render_template(template, bindings)?)
    }

    pub fn call(&self, template_id: &str, bindings: &Bindings) -> Result<ChatExchange, GatewayError> {
        self.call_with_history(template_id, bindings, None)
    }

    pub fn call_with_history(
        &self,
        template_id: &str,
        bindings: &Bindings,
        history: Option<&ChatHistory>,
    ) -> Result<ChatExchange, GatewayError> {
        let prompt = self.render(template_id, bindings)?;
        let digest = binding_digest(bindings);
        let messages = history.map(ChatHistory::messages).unwrap_or_default();
        let request = CompletionRequest {
            template_id,
            bindings,
            digest: &digest,
            prompt: &prompt,
            history: &messages,
        };
        let completion = self.backend.complete(&request)?;
        if completion.text.trim().is_empty() {
            return Err(GatewayError::EmptyCompletion);
        }
        self.trace
            .record(CallKind::Chat, template_id, &digest, &prompt, &completion.text);
        Ok(ChatExchange {
            template_id: template_id.to_string(),
            bindings: bindings.clone(),
            rendered_prompt: prompt,
            completion: completion.text,
            token_usage: completion.usage,
            attempt_count: completion.attempts,
        })
    }
}

pub(crate) fn word_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
