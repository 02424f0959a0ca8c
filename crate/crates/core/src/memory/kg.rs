//! The quadruple store.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::triple::{normalize_entity, Quadruple, Triple};
use super::MemoryError;
use crate::gateway::{Embedder, EmbeddingVector, GatewayError};

pub type QuadId = usize;

/// Append-only temporal knowledge graph.
///
/// Quadruple ids are dense and follow insertion order. The entity index maps
/// each normalized subject/object string to the ids that mention it.
#[derive(Debug, Default)]
pub struct TemporalKg {
    quadruples: Vec<Quadruple>,
    entity_index: BTreeMap<String, BTreeSet<QuadId>>,
    seen: HashSet<((String, String, String), u32)>,
    embedding_cache: RwLock<BTreeMap<String, EmbeddingVector>>,
    max_chapter: Option<u32>,
}

impl Clone for TemporalKg {
    fn clone(&self) -> Self {
        Self {
            quadruples: self.quadruples.clone(),
            entity_index: self.entity_index.clone(),
            seen: self.seen.clone(),
            embedding_cache: RwLock::new(self.cache_snapshot()),
            max_chapter: self.max_chapter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct QuadRecord {
    id: QuadId,
    subject: String,
    action: String,
    object: String,
    chapter: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheRecord {
    entity: String,
    vector: Vec<f64>,
}

/// Node / relation / quadruple counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KgStats {
    /// Distinct normalized entities (subjects and objects).
    pub nodes: usize,
    /// Distinct normalized actions.
    pub relations: usize,
    pub quadruples: usize,
}

impl TemporalKg {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.quadruples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quadruples.is_empty()
    }

    pub fn get(&self, id: QuadId) -> Option<&Quadruple> {
        self.quadruples.get(id)
    }

    pub fn quadruples(&self) -> &[Quadruple] {
        &self.quadruples
    }

    pub fn iter(&self) -> impl Iterator<Item = (QuadId, &Quadruple)> {
        self.quadruples.iter().enumerate()
    }

    pub fn max_chapter(&self) -> Option<u32> {
        self.max_chapter
    }

    pub fn entity_index(&self) -> &BTreeMap<String, BTreeSet<QuadId>> {
        &self.entity_index
    }

    /// Inserts a quadruple unless the same normalized triple is already
    /// stored for the same chapter. Returns the new id.
    pub fn insert(&mut self, triple: Triple, chapter: u32) -> Option<QuadId> {
        if !self.seen.insert((triple.key(), chapter)) {
            return None;
        }
        let id = self.quadruples.len();
        for entity in [&triple.subject, &triple.object] {
            self.entity_index
                .entry(normalize_entity(entity))
                .or_default()
                .insert(id);
        }
        self.max_chapter = Some(self.max_chapter.map_or(chapter, |m| m.max(chapter)));
        self.quadruples.push(Quadruple::new(triple, chapter));
        Some(id)
    }

    /// Recomputes the inverted entity index from the quadruple sequence.
    pub fn rebuild_index(&self) -> BTreeMap<String, BTreeSet<QuadId>> {
        let mut index: BTreeMap<String, BTreeSet<QuadId>> = BTreeMap::new();
        for (id, q) in self.iter() {
            index.entry(normalize_entity(&q.triple.subject)).or_default().insert(id);
            index.entry(normalize_entity(&q.triple.object)).or_default().insert(id);
        }
        index
    }

    pub fn stats(&self) -> KgStats {
        let relations: BTreeSet<String> = self
            .quadruples
            .iter()
            .map(|q| normalize_entity(&q.triple.action))
            .collect();
        KgStats {
            nodes: self.entity_index.len(),
            relations: relations.len(),
            quadruples: self.quadruples.len(),
        }
    }

    /// Cached embedding of a normalized entity, computing it on a miss.
    pub fn entity_embedding(&self, embedder: &Embedder, entity: &str) -> Result<EmbeddingVector, GatewayError> {
        let key = normalize_entity(entity);
        if let Some(v) = self.embedding_cache.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(v.clone());
        }
        let v = embedder.embed(&key)?;
        self.embedding_cache
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .entry(key)
            .or_insert_with(|| v.clone());
        Ok(v)
    }

    pub fn has_cached_embedding(&self, entity: &str) -> bool {
        self.embedding_cache
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .contains_key(&normalize_entity(entity))
    }

    pub fn cache_snapshot(&self) -> BTreeMap<String, EmbeddingVector> {
        self.embedding_cache.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (id, q) in self.iter() {
            let rec = QuadRecord {
                id,
                subject: q.triple.subject.clone(),
                action: q.triple.action.clone(),
                object: q.triple.object.clone(),
                chapter: q.chapter,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Loads a KG file. Ids must be dense and in order; duplicate records are
    /// rejected since they could not have been produced by `insert`.
    pub fn from_jsonl(text: &str) -> Result<Self, MemoryError> {
        let mut kg = Self::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: String| MemoryError::Malformed {
                line: lineno + 1,
                message,
            };
            let rec: QuadRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
            if rec.id != kg.len() {
                return Err(malformed(format!("expected id {}, found {}", kg.len(), rec.id)));
            }
            let triple = Triple::new(&rec.subject, &rec.action, &rec.object)
                .map_err(|e| malformed(e.to_string()))?;
            if kg.insert(triple, rec.chapter).is_none() {
                return Err(malformed("duplicate quadruple".into()));
            }
        }
        Ok(kg)
    }

    pub fn cache_to_jsonl(&self) -> String {
        let mut out = String::new();
        for (entity, v) in self.cache_snapshot() {
            let rec = CacheRecord {
                entity,
                vector: v.values,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn load_cache_jsonl(&self, text: &str) -> Result<usize, MemoryError> {
        let mut cache = self.embedding_cache.write().unwrap_or_else(|e| e.into_inner());
        let mut n = 0;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: CacheRecord = serde_json::from_str(line).map_err(|e| MemoryError::Malformed {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            cache.insert(normalize_entity(&rec.entity), EmbeddingVector::new(rec.vector));
            n += 1;
        }
        Ok(n)
    }

    pub fn load(path: &Path) -> Result<Self, MemoryError> {
        let text = std::fs::read_to_string(path).map_err(|e| MemoryError::Io(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), MemoryError> {
        crate::fsutil::write_atomic(path, self.to_jsonl().as_bytes())
            .map_err(|e| MemoryError::Io(format!("{}: {e}", path.display())))
    }

    pub fn save_cache(&self, path: &Path) -> Result<(), MemoryError> {
        crate::fsutil::write_atomic(path, self.cache_to_jsonl().as_bytes())
            .map_err(|e| MemoryError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load_cache(&self, path: &Path) -> Result<usize, MemoryError> {
        let text = std::fs::read_to_string(path).map_err(|e| MemoryError::Io(format!("{}: {e}", path.display())))?;
        self.load_cache_jsonl(&text)
    }
}
