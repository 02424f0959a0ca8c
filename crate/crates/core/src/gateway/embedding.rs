use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::openai::{Backoff, HttpTransport};
use super::prompts::EMBED;
use super::template::text_digest;
use super::trace::{CallKind, CallTrace};
use super::{GatewayError, ProviderConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine of the angle between two vectors; 0 when either is the zero vector.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

/// Raw text → vector provider.
pub trait EmbeddingBackend: Send + Sync {
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, GatewayError>;
}

/// Embedding handle: enforces a fixed dimension per session and records
/// every call in the shared trace.
#[derive(Clone)]
pub struct Embedder {
    backend: Arc<dyn EmbeddingBackend>,
    dimension: Arc<OnceLock<usize>>,
    trace: CallTrace,
}

impl std::fmt::Debug for Embedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Embedder").field("dimension", &self.dimension.get()).finish()
    }
}

impl Embedder {
    pub fn new(backend: Arc<dyn EmbeddingBackend>, trace: CallTrace) -> Self {
        Self {
            backend,
            dimension: Arc::new(OnceLock::new()),
            trace,
        }
    }

    pub fn with_backend(backend: impl EmbeddingBackend + 'static) -> Self {
        Self::new(Arc::new(backend), CallTrace::new())
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension.get().copied()
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        let values = self.backend.embed_raw(text)?;
        let expected = *self.dimension.get_or_init(|| values.len());
        if values.len() != expected {
            return Err(GatewayError::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        self.trace
            .record(CallKind::Embed, EMBED, &text_digest(text), text, "");
        Ok(EmbeddingVector { values })
    }
}

/// Deterministic offline embedder: each text maps to a pseudo-random unit
/// vector seeded by its SHA-256 digest. Specific texts can be pinned to
/// explicit vectors.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
    overrides: HashMap<String, Vec<f64>>,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self {
            dimension,
            overrides: HashMap::new(),
        }
    }

    pub fn with_override(mut self, text: impl Into<String>, vector: Vec<f64>) -> Self {
        assert_eq!(vector.len(), self.dimension, "override dimension");
        self.overrides.insert(text.into(), vector);
        self
    }

    pub fn vector_for(&self, text: &str) -> Vec<f64> {
        if let Some(v) = self.overrides.get(text) {
            return v.clone();
        }
        let seed: [u8; 32] = Sha256::digest(text.as_bytes()).into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        let raw: Vec<f64> = (0..self.dimension).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            let mut unit = vec![0.0; self.dimension];
            unit[0] = 1.0;
            return unit;
        }
        raw.into_iter().map(|v| v / norm).collect()
    }
}

impl EmbeddingBackend for HashEmbedder {
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        Ok(self.vector_for(text))
    }
}

/// Client for an OpenAI-compatible `/embeddings` endpoint.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    transport: HttpTransport,
}

impl HttpEmbedder {
    pub fn new(config: ProviderConfig) -> Result<Self, GatewayError> {
        Ok(Self {
            transport: HttpTransport::new(config)?,
        })
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.transport.set_backoff(backoff);
        self
    }
}

impl EmbeddingBackend for HttpEmbedder {
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        let body = json!({ "model": self.transport.config().model_name, "input": text });
        let (value, _) = self.transport.post_json("embeddings", &body)?;
        let values = value
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::InvalidResponse(format!("no embedding in {value}")))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| GatewayError::InvalidResponse("non-numeric embedding".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(GatewayError::InvalidResponse("empty embedding".into()));
        }
        Ok(values)
    }
}
