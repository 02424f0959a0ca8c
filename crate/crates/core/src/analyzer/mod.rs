//! Temporal conflict analysis over a story's knowledge graph.
//!
//! Quadruples are grouped by five structural rules, each group is turned
//! into a one-sentence description, and a judge decides whether the
//! description is contradictory. The conflict rate is the share of
//! quadruples that sit in at least one contradictory group.

pub mod grouping;
pub mod verdict;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::gateway::prompts::{describe_id, judge_id};
use crate::gateway::{Bindings, Gateway, GatewayError};
use crate::memory::{QuadId, TemporalKg};

pub use grouping::{
    group_quadruples, serialize_members, GroupingOptions, GroupingPolicy, QuadrupleGroup, DEFAULT_ATTRIBUTE_ACTIONS,
    RULE_ORDER,
};
pub use verdict::{parse_verdict, ConflictVerdict, VerdictParseError};

pub const DEFAULT_CHUNK_SIZE: usize = 25;

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error("analyzer requires a non-empty KG")]
    EmptyKg,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Outcome for one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Judgement {
    #[serde(rename = "Y")]
    Conflict,
    #[serde(rename = "N")]
    NoConflict,
    #[serde(rename = "unjudged")]
    Unjudged,
}

/// Deterministic stand-in for the model judge.
pub type StubPredicate<'a> = &'a dyn Fn(&QuadrupleGroup) -> bool;

/// Where descriptions and verdicts come from.
#[derive(Clone, Copy)]
pub enum Judge<'a> {
    Model(&'a Gateway),
    /// Mechanical description; verdict `Y` exactly when the predicate holds.
    Stub(StubPredicate<'a>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerOptions {
    pub grouping: GroupingOptions,
    pub chunk_size: usize,
}

impl Default for AnalyzerOptions {
    fn default() -> Self {
        Self {
            grouping: GroupingOptions::default(),
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub rule_id: u8,
    pub members: Vec<QuadId>,
    pub key: Vec<String>,
    pub description: String,
    pub verdict: Judgement,
    pub explanation: String,
}

fn two_decimals<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    let raw = RawValue::from_string(format!("{v:.2}")).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictReport {
    /// Quadruples taking part in the analysis.
    pub n_total: usize,
    /// Distinct quadruples in groups judged contradictory.
    pub m: usize,
    #[serde(serialize_with = "two_decimals")]
    pub cr_percent: f64,
    pub conflict_ids: Vec<QuadId>,
    pub policy: GroupingPolicy,
    pub exclude_premise: bool,
    pub groups_total: usize,
    pub groups_conflict: usize,
    pub groups_unjudged: usize,
    pub groups: Vec<GroupRecord>,
}

impl ConflictReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `CR: 25.00%`
    pub fn cr_line(&self) -> String {
        format!("CR: {:.2}%", self.cr_percent)
    }
}

/// `100 * m / n`, with an empty denominator mapping to 0.
pub fn conflict_rate(m: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * m as f64 / n as f64
    }
}

fn stub_description(kg: &TemporalKg, members: &[QuadId]) -> String {
    members
        .iter()
        .map(|&id| {
            let q = kg.get(id).expect("member ids exist");
            format!("{} in chapter {}", q.triple.sentence(), q.chapter)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn describe_group(kg: &TemporalKg, rule_id: u8, members: &[QuadId], gateway: &Gateway) -> Result<String, GatewayError> {
    let bindings = Bindings::from([("inlist".to_string(), serialize_members(kg, rule_id, members))]);
    let exchange = gateway.call(&describe_id(rule_id), &bindings)?;
    Ok(exchange.completion.trim().to_string())
}

/// Judges a description, asking once more if the first answer carries no
/// usable verdict. `Ok(None)` means still unparseable after the retry.
pub fn judge_group(description: &str, rule_id: u8, gateway: &Gateway) -> Result<Option<ConflictVerdict>, GatewayError> {
    if description.trim().is_empty() {
        return Err(GatewayError::EmptyInput);
    }
    let bindings = Bindings::from([("description".to_string(), description.to_string())]);
    for attempt in 1..=2 {
        let exchange = gateway.call(&judge_id(rule_id), &bindings)?;
        match parse_verdict(&exchange.completion) {
            Ok(v) => return Ok(Some(v)),
            Err(e) => log::warn!("rule {rule_id} verdict attempt {attempt}: {e}"),
        }
    }
    Ok(None)
}

fn judge_chunk(
    kg: &TemporalKg,
    group: &QuadrupleGroup,
    members: &[QuadId],
    judge: Judge<'_>,
) -> Result<(String, Judgement, String), GatewayError> {
    match judge {
        Judge::Stub(pred) => {
            let description = stub_description(kg, members);
            let chunk = QuadrupleGroup { members: members.to_vec(), ..group.clone() };
            let (j, why) = if pred(&chunk) {
                (Judgement::Conflict, "stub judge: predicate holds")
            } else {
                (Judgement::NoConflict, "stub judge: predicate does not hold")
            };
            Ok((description, j, why.to_string()))
        }
        Judge::Model(gateway) => {
            let description = describe_group(kg, group.rule_id, members, gateway)?;
            if description.is_empty() {
                return Err(GatewayError::EmptyCompletion);
            }
            Ok(match judge_group(&description, group.rule_id, gateway)? {
                Some(v) => (
                    description,
                    if v.conflict { Judgement::Conflict } else { Judgement::NoConflict },
                    v.explanation,
                ),
                None => {
                    log::warn!("rule {} group {:?} left unjudged", group.rule_id, members);
                    (description, Judgement::Unjudged, "no verdict after retry".into())
                }
            })
        }
    }
}

/// Groups, describes and judges every potential conflict in `kg`.
pub fn analyze(kg: &TemporalKg, judge: Judge<'_>, options: &AnalyzerOptions) -> Result<ConflictReport, AnalyzerError> {
    let n_total = grouping::considered(kg, &options.grouping).len();
    if n_total == 0 {
        return Err(AnalyzerError::EmptyKg);
    }
    let chunk = options.chunk_size.max(1);
    let mut conflict_ids = BTreeSet::new();
    let mut records = Vec::new();
    for group in group_quadruples(kg, &options.grouping) {
        let mut descriptions = Vec::new();
        let mut explanations = Vec::new();
        let mut verdicts = Vec::new();
        for members in group.members.chunks(chunk) {
            let (d, j, e) = judge_chunk(kg, &group, members, judge)?;
            descriptions.push(d);
            explanations.push(e);
            verdicts.push(j);
        }
        let verdict = if verdicts.contains(&Judgement::Conflict) {
            Judgement::Conflict
        } else if verdicts.contains(&Judgement::Unjudged) {
            Judgement::Unjudged
        } else {
            Judgement::NoConflict
        };
        if verdict == Judgement::Conflict {
            conflict_ids.extend(group.members.iter().copied());
        }
        records.push(GroupRecord {
            rule_id: group.rule_id,
            members: group.members,
            key: group.key,
            description: descriptions.join(" "),
            verdict,
            explanation: explanations.join(" "),
        });
    }
    let m = conflict_ids.len();
    Ok(ConflictReport {
        n_total,
        m,
        cr_percent: conflict_rate(m, n_total),
        conflict_ids: conflict_ids.into_iter().collect(),
        policy: options.grouping.policy,
        exclude_premise: options.grouping.exclude_premise,
        groups_total: records.len(),
        groups_conflict: records.iter().filter(|r| r.verdict == Judgement::Conflict).count(),
        groups_unjudged: records.iter().filter(|r| r.verdict == Judgement::Unjudged).count(),
        groups: records,
    })
}
