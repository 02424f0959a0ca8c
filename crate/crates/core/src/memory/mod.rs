//! Temporal knowledge-graph memory: triple extraction, storage and
//! relevance-filtered retrieval.

pub mod kg;
pub mod retrieval;
pub mod triple;

use thiserror::Error;

use crate::gateway::GatewayError;

pub use kg::{KgStats, QuadId, TemporalKg};
pub use retrieval::{
    entity_retrieve, extract_triples, parse_relevance, query_entities, query_relevant, select_topk,
    semantic_filter, store, ParsedScore, RelevanceScore, RelevantContext, RetrievalSettings,
    ScoredCandidate, DEFAULT_THRESHOLD, DEFAULT_TOP_K,
};
pub use triple::{normalize_entity, parse_triples, ExtractedTriples, Quadruple, Triple, TripleError};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("no text to extract triples from")]
    EmptyText,
    #[error("extraction yielded no valid triples ({skipped_lines} malformed lines)")]
    ExtractionEmpty { skipped_lines: usize },
    #[error("similarity threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}
