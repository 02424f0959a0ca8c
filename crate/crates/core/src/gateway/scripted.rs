//! Deterministic backends for offline runs.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::template::{binding_digest, Bindings};
use super::trace::{CallKind, TraceEntry};
use super::{word_tokens, ChatBackend, Completion, CompletionRequest, GatewayError, TokenUsage};

/// One line of a replay fixture file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub template_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub default: bool,
    pub response: String,
}

/// Canned completions keyed by `(template_id, binding digest)`, with optional
/// per-template defaults.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayFixture {
    entries: HashMap<(String, String), String>,
    defaults: HashMap<String, String>,
    // insertion order, for stable serialization
    order: Vec<FixtureRecord>,
}

impl ReplayFixture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, template_id: &str, digest: &str, response: impl Into<String>) {
        let response = response.into();
        let key = (template_id.to_string(), digest.to_string());
        if self.entries.insert(key, response.clone()).is_none() {
            self.order.push(FixtureRecord {
                template_id: template_id.to_string(),
                digest: Some(digest.to_string()),
                default: false,
                response,
            });
        }
    }

    pub fn insert_for(&mut self, template_id: &str, bindings: &Bindings, response: impl Into<String>) {
        self.insert(template_id, &binding_digest(bindings), response);
    }

    pub fn set_default(&mut self, template_id: &str, response: impl Into<String>) {
        let response = response.into();
        if self.defaults.insert(template_id.to_string(), response.clone()).is_none() {
            self.order.push(FixtureRecord {
                template_id: template_id.to_string(),
                digest: None,
                default: true,
                response,
            });
        }
    }

    pub fn lookup(&self, template_id: &str, digest: &str) -> Option<&str> {
        self.entries
            .get(&(template_id.to_string(), digest.to_string()))
            .or_else(|| self.defaults.get(template_id))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn records(&self) -> &[FixtureRecord] {
        &self.order
    }

    pub fn from_records(records: impl IntoIterator<Item = FixtureRecord>) -> Result<Self, GatewayError> {
        let mut fixture = Self::new();
        for (i, r) in records.into_iter().enumerate() {
            match (r.default, r.digest) {
                (true, None) => fixture.set_default(&r.template_id, r.response),
                (false, Some(d)) => fixture.insert(&r.template_id, &d, r.response),
                (true, Some(_)) => {
                    return Err(GatewayError::Fixture(format!(
                        "record {}: both digest and default set",
                        i + 1
                    )))
                }
                (false, None) => {
                    return Err(GatewayError::Fixture(format!(
                        "record {}: needs a digest or \"default\": true",
                        i + 1
                    )))
                }
            }
        }
        Ok(fixture)
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, GatewayError> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(line)
                .map_err(|e| GatewayError::Fixture(format!("line {}: {e}", lineno + 1)))?;
            records.push(record);
        }
        Self::from_records(records)
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))?;
        Self::parse_jsonl(&text)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.order {
            out.push_str(&serde_json::to_string(r).expect("fixture records serialize"));
            out.push('\n');
        }
        out
    }

    /// Builds a fixture that replays the chat calls of a recorded trace.
    /// The first response seen for a key wins.
    pub fn from_trace<'a>(entries: impl IntoIterator<Item = &'a TraceEntry>) -> Self {
        let mut fixture = Self::new();
        for e in entries {
            if e.kind == CallKind::Chat {
                fixture.insert(&e.template_id, &e.digest, e.response.clone());
            }
        }
        fixture
    }
}

/// Looks up the canned response for a template call.
pub fn scripted_complete(
    fixture: &ReplayFixture,
    template_id: &str,
    bindings: &Bindings,
) -> Result<String, GatewayError> {
    let digest = binding_digest(bindings);
    fixture
        .lookup(template_id, &digest)
        .map(str::to_string)
        .ok_or(GatewayError::FixtureMiss {
            template_id: template_id.to_string(),
            digest,
        })
}

/// Replays a [`ReplayFixture`]. Ignores prompt text and history entirely.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    fixture: ReplayFixture,
}

impl ScriptedBackend {
    pub fn new(fixture: ReplayFixture) -> Self {
        Self { fixture }
    }

    pub fn fixture(&self) -> &ReplayFixture {
        &self.fixture
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, GatewayError> {
        let text = self
            .fixture
            .lookup(request.template_id, request.digest)
            .ok_or_else(|| GatewayError::FixtureMiss {
                template_id: request.template_id.to_string(),
                digest: request.digest.to_string(),
            })?;
        Ok(Completion {
            text: text.to_string(),
            usage: TokenUsage {
                prompt_tokens: word_tokens(request.prompt),
                completion_tokens: word_tokens(text),
            },
            attempts: 1,
        })
    }
}

type Responder = dyn Fn(&CompletionRequest<'_>) -> Result<String, GatewayError> + Send + Sync;

/// Backend driven by a closure; handy for tests and for synthesizing
/// fixtures.
pub struct ResponderBackend {
    respond: Box<Responder>,
}

impl ResponderBackend {
    pub fn new<F>(respond: F) -> Self
    where
        F: Fn(&CompletionRequest<'_>) -> Result<String, GatewayError> + Send + Sync + 'static,
    {
        Self {
            respond: Box::new(respond),
        }
    }

    /// Answers from a per-template table of fixed responses.
    pub fn from_table(table: BTreeMap<String, String>) -> Self {
        Self::new(move |r| {
            table
                .get(r.template_id)
                .cloned()
                .ok_or_else(|| GatewayError::FixtureMiss {
                    template_id: r.template_id.to_string(),
                    digest: r.digest.to_string(),
                })
        })
    }
}

impl ChatBackend for ResponderBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, GatewayError> {
        let text = (self.respond)(request)?;
        Ok(Completion {
            usage: TokenUsage {
                prompt_tokens: word_tokens(request.prompt),
                completion_tokens: word_tokens(&text),
            },
            text,
            attempts: 1,
        })
    }
}
