//! Append-only call log shared by every provider handle.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::prompts::EXTRACT_TRIPLES;
use super::template::Bindings;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One stateless prompt → completion round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub template_id: String,
    pub bindings: Bindings,
    pub rendered_prompt: String,
    pub completion: String,
    pub token_usage: TokenUsage,
    pub attempt_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Chat,
    Embed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub seq: u64,
    pub kind: CallKind,
    pub template_id: String,
    pub digest: String,
    /// Rendered prompt, or the embedded text for embedding calls.
    pub prompt: String,
    /// Completion text; empty for embedding calls.
    pub response: String,
}

/// Thread-safe trace handle. Clones share the same log.
#[derive(Debug, Clone, Default)]
pub struct CallTrace {
    entries: Arc<Mutex<Vec<TraceEntry>>>,
}

impl CallTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry and returns its sequence number. The number is
    /// assigned under the log lock, so concurrent appenders never collide.
    pub fn record(
        &self,
        kind: CallKind,
        template_id: &str,
        digest: &str,
        prompt: &str,
        response: &str,
    ) -> u64 {
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        let seq = entries.len() as u64;
        entries.push(TraceEntry {
            seq,
            kind,
            template_id: template_id.to_string(),
            digest: digest.to_string(),
            prompt: prompt.to_string(),
            response: response.to_string(),
        });
        seq
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<TraceEntry> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Entries with `seq >= from`.
    pub fn since(&self, from: usize) -> Vec<TraceEntry> {
        let entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        entries.get(from..).map(<[_]>::to_vec).unwrap_or_default()
    }
}

/// Per-template call counts derived from a trace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallLedger {
    pub per_template: BTreeMap<String, u64>,
    pub total: u64,
    /// Extraction calls made while storing text into the knowledge graph.
    pub kg_construction: u64,
}

impl CallLedger {
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = &'a TraceEntry>) -> Self {
        let mut ledger = Self::default();
        for e in entries {
            ledger.add(&e.template_id);
        }
        ledger
    }

    pub fn add(&mut self, template_id: &str) {
        *self.per_template.entry(template_id.to_string()).or_default() += 1;
        self.total += 1;
        if template_id == EXTRACT_TRIPLES {
            self.kg_construction += 1;
        }
    }

    pub fn merge(&mut self, other: &CallLedger) {
        for (k, v) in &other.per_template {
            *self.per_template.entry(k.clone()).or_default() += v;
        }
        self.total += other.total;
        self.kg_construction += other.kg_construction;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concurrent_appends_get_unique_dense_seqs() {
        let trace = CallTrace::new();
        std::thread::scope(|s| {
            for t in 0..8 {
                let trace = trace.clone();
                s.spawn(move || {
                    for i in 0..50 {
                        trace.record(CallKind::Chat, "t", &format!("{t}-{i}"), "p", "r");
                    }
                });
            }
        });
        let entries = trace.snapshot();
        assert_eq!(entries.len(), 400);
        for (i, e) in entries.iter().enumerate() {
            assert_eq!(e.seq, i as u64);
        }
    }

    #[test]
    fn ledger_totals_match_trace() {
        let trace = CallTrace::new();
        for id in ["extract_triples", "relevance", "relevance", "embed", "extract_triples"] {
            trace.record(CallKind::Chat, id, "d", "", "");
        }
        let ledger = CallLedger::from_entries(&trace.snapshot());
        assert_eq!(ledger.total as usize, trace.len());
        assert_eq!(ledger.per_template.values().sum::<u64>(), ledger.total);
        assert_eq!(ledger.kg_construction, 2);
        assert_eq!(trace.since(3).len(), 2);
        assert!(trace.since(10).is_empty());
    }
}
