//! Storing text into the graph and answering relevance queries.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::kg::{QuadId, TemporalKg};
use super::triple::{normalize_entity, parse_triples, Quadruple, Triple};
use super::MemoryError;
use crate::gateway::prompts::{EXTRACT_QUERY, EXTRACT_TRIPLES, RELEVANCE};
use crate::gateway::{cosine_similarity, Bindings, Embedder, Gateway};

pub const DEFAULT_THRESHOLD: f64 = 0.75;
pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSettings {
    pub threshold: f64,
    pub top_k: usize,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            top_k: DEFAULT_TOP_K,
        }
    }
}

fn extract_with(gateway: &Gateway, template_id: &str, text: &str) -> Result<Vec<Triple>, MemoryError> {
    if text.trim().is_empty() {
        return Err(MemoryError::EmptyText);
    }
    let mut b = Bindings::new();
    b.insert("text".into(), text.to_string());
    let exchange = gateway.call(template_id, &b)?;
    let parsed = parse_triples(&exchange.completion);
    for w in &parsed.warnings {
        log::warn!("triple extraction: {w}");
    }
    if parsed.triples.is_empty() {
        return Err(MemoryError::ExtractionEmpty {
            skipped_lines: parsed.warnings.len(),
        });
    }
    Ok(parsed.triples)
}

/// Asks the model for the triples contained in `text`.
pub fn extract_triples(text: &str, gateway: &Gateway) -> Result<Vec<Triple>, MemoryError> {
    extract_with(gateway, EXTRACT_TRIPLES, text)
}

/// Extracts triples from `text` and stores them under `chapter`. Returns the
/// number of quadruples actually inserted.
pub fn store(kg: &mut TemporalKg, text: &str, chapter: u32, gateway: &Gateway) -> Result<usize, MemoryError> {
    let triples = extract_triples(text, gateway)?;
    let mut inserted = 0;
    for triple in triples {
        if triple.has_placeholder() {
            log::warn!("storing triple with unresolved placeholder: {}", triple.sentence());
        }
        if kg.insert(triple, chapter).is_some() {
            inserted += 1;
        }
    }
    Ok(inserted)
}

/// Entities (subjects and objects) of the triples found in a query, keyed by
/// normalized form with the first display form seen.
pub fn query_entities(query_text: &str, gateway: &Gateway) -> Result<BTreeMap<String, String>, MemoryError> {
    let triples = extract_with(gateway, EXTRACT_QUERY, query_text)?;
    let mut out = BTreeMap::new();
    for t in &triples {
        for e in [&t.subject, &t.object] {
            let display = e.split_whitespace().collect::<Vec<_>>().join(" ");
            out.entry(normalize_entity(e)).or_insert(display);
        }
    }
    Ok(out)
}

/// Ids of stored quadruples whose subject or object matches some query
/// entity: exactly after normalization, or with cosine similarity of the
/// entity embeddings `>= threshold`.
pub fn entity_retrieve<S: AsRef<str>>(
    kg: &TemporalKg,
    query_entities: &[S],
    embedder: &Embedder,
    threshold: f64,
) -> Result<BTreeSet<QuadId>, MemoryError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(MemoryError::InvalidThreshold(threshold));
    }
    let queries: BTreeSet<String> = query_entities
        .iter()
        .map(|q| normalize_entity(q.as_ref()))
        .filter(|q| !q.is_empty())
        .collect();
    let mut candidates = BTreeSet::new();
    if queries.is_empty() {
        return Ok(candidates);
    }
    let mut query_vectors = Vec::new();
    for (entity, ids) in kg.entity_index() {
        let matched = if queries.contains(entity) {
            true
        } else {
            if query_vectors.is_empty() {
                for q in &queries {
                    query_vectors.push(kg.entity_embedding(embedder, q)?);
                }
            }
            let v = kg.entity_embedding(embedder, entity)?;
            query_vectors.iter().any(|q| cosine_similarity(q, &v) >= threshold)
        };
        if matched {
            candidates.extend(ids.iter().copied());
        }
    }
    Ok(candidates)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceScore {
    pub total: u8,
    /// subject, object, action, same event, potentially useful
    pub criteria: [bool; 5],
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedScore {
    pub score: RelevanceScore,
    pub warnings: Vec<String>,
}

fn criterion_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)criterion\s*([1-5])\s*[.:]?\s*my\s+result\s+is\s*:?\s*add\s*\(?\s*([01])").unwrap()
    })
}

fn sum_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([01](?:\s*\+\s*[01])+)\s*=\s*(\d+)").unwrap())
}

fn score_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)score\s*:\s*\**\s*(\d+)").unwrap())
}

/// Parses a relevance verdict. The `Score:` line is authoritative; the sum
/// line and the per-criterion lines are fallbacks. The criteria breakdown
/// is adjusted so that its count always equals the total.
pub fn parse_relevance(completion: &str) -> ParsedScore {
    let mut warnings = Vec::new();
    let mut criteria = [false; 5];
    let mut seen = [false; 5];
    for c in criterion_re().captures_iter(completion) {
        let i: usize = c[1].parse::<usize>().unwrap() - 1;
        criteria[i] = &c[2] == "1";
        seen[i] = true;
    }
    let part1 = seen.iter().all(|&s| s).then(|| criteria.iter().filter(|&&b| b).count() as u8);

    let part2_text = completion
        .find("Part2")
        .map(|i| &completion[i..])
        .unwrap_or(completion);
    let part2_text = part2_text.split("Part3").next().unwrap_or(part2_text);
    let part2 = sum_re()
        .captures_iter(part2_text)
        .last()
        .and_then(|c| c[2].parse::<u8>().ok());

    let part3_text = completion.find("Part3").map(|i| &completion[i..]).unwrap_or(completion);
    let part3 = score_re()
        .captures_iter(part3_text)
        .last()
        .and_then(|c| c[1].parse::<u32>().ok());

    let total = match (part3, part2, part1) {
        (Some(s), p2, _) if s <= 5 => {
            if let Some(p2) = p2.filter(|&p2| u32::from(p2) != s) {
                warnings.push(format!("sum line says {p2} but Score line says {s}; using {s}"));
            }
            s as u8
        }
        (p3, Some(p2), _) if p2 <= 5 => {
            warnings.push(match p3 {
                Some(s) => format!("Score {s} out of range; using sum line {p2}"),
                None => format!("no Score line; using sum line {p2}"),
            });
            p2
        }
        (_, _, Some(p1)) => {
            warnings.push(format!("no usable Score or sum line; using criteria count {p1}"));
            p1
        }
        _ => {
            warnings.push("unparseable relevance verdict; scoring 0".into());
            0
        }
    };

    let count = criteria.iter().filter(|&&b| b).count() as u8;
    if count != total {
        if part1.is_some() {
            warnings.push(format!("criteria count {count} disagrees with total {total}; breakdown adjusted"));
        }
        let mut diff = i16::from(total) - i16::from(count);
        for c in criteria.iter_mut() {
            if diff > 0 && !*c {
                *c = true;
                diff -= 1;
            }
        }
        for c in criteria.iter_mut().rev() {
            if diff < 0 && *c {
                *c = false;
                diff += 1;
            }
        }
    }
    ParsedScore {
        score: RelevanceScore {
            total,
            criteria,
            rationale: completion.trim().to_string(),
        },
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredCandidate {
    pub id: QuadId,
    pub quadruple: Quadruple,
    pub score: RelevanceScore,
}

/// Scores each candidate against the query, one model call per candidate,
/// in candidate order.
pub fn semantic_filter(
    query_text: &str,
    candidates: &[(QuadId, Quadruple)],
    gateway: &Gateway,
) -> Result<Vec<ScoredCandidate>, MemoryError> {
    let mut out = Vec::with_capacity(candidates.len());
    for (id, quad) in candidates {
        let mut b = Bindings::new();
        b.insert("outline".into(), query_text.to_string());
        b.insert("triplesentence".into(), quad.triple.sentence());
        let exchange = gateway.call(RELEVANCE, &b)?;
        let parsed = parse_relevance(&exchange.completion);
        for w in &parsed.warnings {
            log::warn!("relevance for quadruple {id}: {w}");
        }
        out.push(ScoredCandidate {
            id: *id,
            quadruple: quad.clone(),
            score: parsed.score,
        });
    }
    Ok(out)
}

/// Concise context handed to a generation prompt.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevantContext {
    pub sentences: Vec<String>,
    pub source_ids: Vec<Vec<QuadId>>,
}

impl RelevantContext {
    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    /// Sentences joined one per line.
    pub fn joined(&self) -> String {
        self.sentences.join("\n")
    }
}

/// Ranks by (score desc, chapter desc, id asc), keeps the best `k` with a
/// non-zero score, then folds runs of the same triple over consecutive
/// chapters into one ranged statement.
pub fn select_topk(scored: &[ScoredCandidate], k: usize) -> RelevantContext {
    let mut ranked: Vec<&ScoredCandidate> = scored.iter().filter(|c| c.score.total > 0).collect();
    ranked.sort_by(|a, b| {
        b.score
            .total
            .cmp(&a.score.total)
            .then(b.quadruple.chapter.cmp(&a.quadruple.chapter))
            .then(a.id.cmp(&b.id))
    });
    ranked.truncate(k.max(1));

    // group by normalized triple, keeping first-rank order
    let mut groups: Vec<(_, Vec<&ScoredCandidate>)> = Vec::new();
    for c in ranked {
        let key = c.quadruple.triple.key();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(c),
            None => groups.push((key, vec![c])),
        }
    }

    let mut ctx = RelevantContext::default();
    for (_, members) in groups {
        let triple = &members[0].quadruple.triple;
        let mut by_chapter: Vec<(u32, QuadId)> = members.iter().map(|c| (c.quadruple.chapter, c.id)).collect();
        by_chapter.sort();
        let mut runs: Vec<Vec<(u32, QuadId)>> = Vec::new();
        for item in by_chapter {
            match runs.last_mut() {
                Some(run) if run.last().unwrap().0 + 1 == item.0 => run.push(item),
                _ => runs.push(vec![item]),
            }
        }
        for run in runs {
            let first = run[0].0;
            let last = run[run.len() - 1].0;
            let sentence = if run.len() > 1 {
                format!("{} from chapter {first} to chapter {last}", triple.sentence())
            } else {
                format!("{} in chapter {first}", triple.sentence())
            };
            ctx.sentences.push(sentence);
            ctx.source_ids.push(run.iter().map(|(_, id)| *id).collect());
        }
    }
    ctx
}

/// Full query path: query entities → entity retrieval → semantic filter →
/// top-k selection. An empty graph short-circuits to an empty context
/// without any model call.
pub fn query_relevant(
    kg: &TemporalKg,
    query_text: &str,
    settings: &RetrievalSettings,
    gateway: &Gateway,
    embedder: &Embedder,
) -> Result<RelevantContext, MemoryError> {
    if kg.is_empty() {
        return Ok(RelevantContext::default());
    }
    let entities = query_entities(query_text, gateway)?;
    let keys: Vec<&String> = entities.keys().collect();
    let ids = entity_retrieve(kg, &keys, embedder, settings.threshold)?;
    if ids.is_empty() {
        return Ok(RelevantContext::default());
    }
    let candidates: Vec<(QuadId, Quadruple)> = ids
        .into_iter()
        .map(|id| (id, kg.get(id).expect("retrieved ids exist").clone()))
        .collect();
    let scored = semantic_filter(query_text, &candidates, gateway)?;
    Ok(select_topk(&scored, settings.top_k))
}
