//! The plan-and-write loop with step-level checkpoints.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::outline::{
    plan_detailed_outline, plan_rough_outline, write_chapter, DetailedOutline, OutlineParseError, RoughOutline,
    StepError,
};
use super::premise::{StoryPremise, WritingTheory};
use crate::gateway::{ChatHistory, Embedder, Gateway, GatewayError};
use crate::memory::{query_relevant, store, MemoryError, RelevantContext, RetrievalSettings, TemporalKg};

pub const DEFAULT_CHAPTERS_PER_STAGE: usize = 3;
pub const DEFAULT_HISTORY_ROUNDS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Chapter outlines per stage.
    pub chapters_per_stage: usize,
    pub retrieval: RetrievalSettings,
    /// When false the knowledge graph is bypassed and generation calls carry
    /// a short chat history instead.
    pub memory: bool,
    pub history_rounds: usize,
    /// Stop after this many stages (for short trial runs).
    pub max_stages: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            chapters_per_stage: DEFAULT_CHAPTERS_PER_STAGE,
            retrieval: RetrievalSettings::default(),
            memory: true,
            history_rounds: DEFAULT_HISTORY_ROUNDS,
            max_stages: None,
        }
    }
}

/// One atomic, checkpointed unit of work. Stage and item numbers are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepId {
    StorePremise,
    RoughOutline,
    DetailedOutline { stage: usize },
    Chapter { stage: usize, item: usize },
}

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StorePremise => write!(f, "premise"),
            Self::RoughOutline => write!(f, "rough"),
            Self::DetailedOutline { stage } => write!(f, "outline:{stage}"),
            Self::Chapter { stage, item } => write!(f, "chapter:{stage}.{item}"),
        }
    }
}

impl FromStr for StepId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("unknown step {s:?} (premise, rough, outline:S, chapter:S.T)");
        match s.trim() {
            "premise" => Ok(Self::StorePremise),
            "rough" => Ok(Self::RoughOutline),
            other => {
                if let Some(n) = other.strip_prefix("outline:") {
                    let stage = n.parse().map_err(|_| bad())?;
                    Ok(Self::DetailedOutline { stage })
                } else if let Some(rest) = other.strip_prefix("chapter:") {
                    let (a, b) = rest.split_once('.').ok_or_else(bad)?;
                    Ok(Self::Chapter {
                        stage: a.parse().map_err(|_| bad())?,
                        item: b.parse().map_err(|_| bad())?,
                    })
                } else {
                    Err(bad())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chapter {
    pub number: u32,
    pub stage: usize,
    pub item: usize,
    pub outline: String,
    pub text: String,
}

/// Everything produced so far; enough to resume at the next step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryState {
    pub premise: StoryPremise,
    pub theory: WritingTheory,
    pub premise_stored: bool,
    pub rough: Option<RoughOutline>,
    pub detailed: Vec<DetailedOutline>,
    pub chapters: Vec<Chapter>,
    pub chapter_counter: u32,
    /// Rolling chat window, present only when memory is disabled.
    pub history: Option<ChatHistory>,
    #[serde(default)]
    pub stage_limit: Option<usize>,
}

impl StoryState {
    pub fn new(premise: StoryPremise, theory: WritingTheory, config: &PipelineConfig) -> Self {
        Self {
            premise,
            theory,
            premise_stored: false,
            rough: None,
            detailed: Vec::new(),
            chapters: Vec::new(),
            chapter_counter: 0,
            history: (!config.memory).then(|| ChatHistory::new(config.history_rounds)),
            stage_limit: config.max_stages,
        }
    }

    fn chapters_in_stage(&self, stage: usize) -> usize {
        self.chapters.iter().filter(|c| c.stage == stage).count()
    }

    /// The first step not yet completed, or `None` when the story is done.
    pub fn next_step(&self) -> Option<StepId> {
        if !self.premise_stored {
            return Some(StepId::StorePremise);
        }
        if self.rough.is_none() {
            return Some(StepId::RoughOutline);
        }
        if let Some(last) = self.detailed.last() {
            let done = self.chapters_in_stage(last.stage_index);
            if done < last.items.len() {
                return Some(StepId::Chapter {
                    stage: last.stage_index,
                    item: done + 1,
                });
            }
        }
        let planned = self.rough.as_ref().map_or(0, |r| r.entries.len());
        let stages = self.stage_limit.map_or(planned, |l| l.min(planned));
        (self.detailed.len() < stages).then(|| StepId::DetailedOutline {
            stage: self.detailed.len() + 1,
        })
    }

    /// Completed steps in execution order.
    pub fn completed_steps(&self) -> Vec<StepId> {
        let mut out = Vec::new();
        if self.premise_stored {
            out.push(StepId::StorePremise);
        }
        if self.rough.is_some() {
            out.push(StepId::RoughOutline);
        }
        for d in &self.detailed {
            out.push(StepId::DetailedOutline { stage: d.stage_index });
            for c in self.chapters.iter().filter(|c| c.stage == d.stage_index) {
                out.push(StepId::Chapter { stage: c.stage, item: c.item });
            }
        }
        out
    }

    pub fn is_complete(&self) -> bool {
        self.rough.is_some() && self.next_step().is_none()
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("{error} (after {attempts} attempts)")]
    OutlineParse { error: OutlineParseError, attempts: u32 },
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error("stopped after step {0}")]
    Halted(StepId),
}

impl From<StepError> for PipelineError {
    fn from(e: StepError) -> Self {
        match e {
            StepError::Gateway(g) => Self::Gateway(g),
            StepError::Parse { error, attempts } => Self::OutlineParse { error, attempts },
        }
    }
}

/// Persists progress after each completed step.
pub trait Checkpoint {
    fn commit(&mut self, step: StepId, state: &StoryState, kg: &TemporalKg) -> Result<(), PipelineError>;
}

/// Checkpoint that only remembers which steps were committed.
#[derive(Debug, Default)]
pub struct MemoryCheckpoint {
    pub committed: Vec<StepId>,
}

impl Checkpoint for MemoryCheckpoint {
    fn commit(&mut self, step: StepId, _: &StoryState, _: &TemporalKg) -> Result<(), PipelineError> {
        self.committed.push(step);
        Ok(())
    }
}

pub struct Pipeline<'a> {
    pub config: &'a PipelineConfig,
    pub gateway: &'a Gateway,
    pub embedder: &'a Embedder,
}

impl Pipeline<'_> {
    fn context_for(&self, kg: &TemporalKg, query: &str) -> Result<RelevantContext, MemoryError> {
        if !self.config.memory {
            return Ok(RelevantContext::default());
        }
        query_relevant(kg, query, &self.config.retrieval, self.gateway, self.embedder)
    }

    /// Executes one step, mutating state and graph only once the whole step
    /// has succeeded.
    pub fn execute(&self, step: StepId, state: &mut StoryState, kg: &mut TemporalKg) -> Result<(), PipelineError> {
        match step {
            StepId::StorePremise => {
                if self.config.memory {
                    store(kg, &state.premise.to_text(), 0, self.gateway)?;
                }
                state.premise_stored = true;
            }
            StepId::RoughOutline => {
                state.rough = Some(plan_rough_outline(&state.premise, &state.theory, self.gateway)?);
            }
            StepId::DetailedOutline { stage } => {
                let entry = state.rough.as_ref().expect("rough outline precedes stages").entries[stage - 1].clone();
                let context = self.context_for(kg, &entry.outline)?;
                let prev = state.detailed.last().and_then(|d| d.items.last()).cloned();
                let mut history = state.history.clone();
                let detailed = plan_detailed_outline(
                    &entry,
                    stage,
                    prev.as_deref(),
                    &context,
                    self.config.chapters_per_stage,
                    self.gateway,
                    history.as_mut(),
                )?;
                state.detailed.push(detailed);
                state.history = history;
            }
            StepId::Chapter { stage, item } => {
                let outline = state.detailed[stage - 1].items[item - 1].clone();
                let context = self.context_for(kg, &outline)?;
                let mut history = state.history.clone();
                let text = write_chapter(&outline, &context, self.gateway, history.as_mut())?;
                let number = state.chapter_counter + 1;
                if self.config.memory {
                    store(kg, &text, number, self.gateway)?;
                }
                state.chapter_counter = number;
                state.chapters.push(Chapter {
                    number,
                    stage,
                    item,
                    outline,
                    text,
                });
                state.history = history;
            }
        }
        Ok(())
    }

    /// Runs every remaining step, committing after each. With `halt_after`
    /// set, stops with [`PipelineError::Halted`] right after that step.
    pub fn run(
        &self,
        state: &mut StoryState,
        kg: &mut TemporalKg,
        checkpoint: &mut dyn Checkpoint,
        halt_after: Option<StepId>,
    ) -> Result<(), PipelineError> {
        if self.config.chapters_per_stage == 0 {
            return Err(PipelineError::Artifact("chapters per stage must be at least 1".into()));
        }
        while let Some(step) = state.next_step() {
            log::info!("step {step}");
            self.execute(step, state, kg)?;
            checkpoint.commit(step, state, kg)?;
            if halt_after == Some(step) {
                return Err(PipelineError::Halted(step));
            }
        }
        Ok(())
    }
}
