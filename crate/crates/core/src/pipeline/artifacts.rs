//! On-disk run directory: outline and story documents, KG files, trace,
//! ledger and the manifest that makes a run resumable.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::outline::{DetailedOutline, RoughOutline, StageEntry};
use super::run::{Chapter, Checkpoint, PipelineError, StepId, StoryState};
use crate::fsutil::write_atomic;
use crate::gateway::{CallLedger, CallTrace, TraceEntry};
use crate::memory::TemporalKg;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STATE_FILE: &str = "state.json";
pub const OUTLINE_FILE: &str = "outline.json";
pub const STORY_FILE: &str = "story.md";
pub const KG_FILE: &str = "kg.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.jsonl";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const LEDGER_FILE: &str = "ledger.json";

/// Artifact name → file name, as listed in the manifest.
pub fn artifact_files() -> BTreeMap<String, String> {
    [
        ("state", STATE_FILE),
        ("outline", OUTLINE_FILE),
        ("story", STORY_FILE),
        ("kg", KG_FILE),
        ("embeddings", EMBEDDINGS_FILE),
        ("trace", TRACE_FILE),
        ("ledger", LEDGER_FILE),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlineStage {
    pub index: usize,
    pub stage: String,
    pub outline: String,
    pub chapters: Vec<String>,
}

/// Rough outline with each stage's chapter outlines nested under it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlineDocument {
    pub theory: String,
    pub stages: Vec<OutlineStage>,
}

impl OutlineDocument {
    pub fn from_parts(theory: &str, rough: &RoughOutline, detailed: &[DetailedOutline]) -> Self {
        let stages = rough
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| OutlineStage {
                index: i + 1,
                stage: e.stage.clone(),
                outline: e.outline.clone(),
                chapters: detailed
                    .iter()
                    .find(|d| d.stage_index == i + 1)
                    .map(|d| d.items.clone())
                    .unwrap_or_default(),
            })
            .collect();
        Self {
            theory: theory.to_string(),
            stages,
        }
    }

    /// Splits back into the rough outline and the detailed outlines that
    /// have been planned so far.
    pub fn to_parts(&self) -> (RoughOutline, Vec<DetailedOutline>) {
        let rough = RoughOutline {
            entries: self
                .stages
                .iter()
                .map(|s| StageEntry {
                    stage: s.stage.clone(),
                    outline: s.outline.clone(),
                })
                .collect(),
        };
        let detailed = self
            .stages
            .iter()
            .filter(|s| !s.chapters.is_empty())
            .map(|s| DetailedOutline {
                stage_index: s.index,
                items: s.chapters.clone(),
            })
            .collect();
        (rough, detailed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("outline serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Chapters joined under `# Chapter N` headers.
pub fn render_story(chapters: &[Chapter]) -> String {
    let mut out = String::new();
    for (i, c) in chapters.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("# Chapter {}\n\n{}\n", c.number, c.text.trim()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: u64,
    pub updated_at: u64,
    pub config: Value,
    pub completed_steps: Vec<String>,
    pub complete: bool,
    pub artifacts: BTreeMap<String, String>,
    pub ledger: CallLedger,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Artifact(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    write_atomic(path, text.as_bytes()).map_err(|e| io_err(path, e))
}

/// A resumed run: saved state and graph.
pub struct Resumed {
    pub state: StoryState,
    pub kg: TemporalKg,
}

/// File-backed checkpoint for one run directory.
pub struct RunDir {
    dir: PathBuf,
    manifest: RunManifest,
    trace: CallTrace,
    flushed: usize,
    next_seq: u64,
}

impl RunDir {
    /// Opens `dir`, resuming if it already holds a run with the same id.
    pub fn open(dir: &Path, run_id: &str, config: Value, trace: CallTrace) -> Result<(Self, Option<Resumed>), PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let flushed = trace.len();
        if !manifest_path.exists() {
            let t = now();
            let manifest = RunManifest {
                run_id: run_id.to_string(),
                created_at: t,
                updated_at: t,
                config,
                completed_steps: Vec::new(),
                complete: false,
                artifacts: artifact_files(),
                ledger: CallLedger::default(),
            };
            let run = Self { dir: dir.to_path_buf(), manifest, trace, flushed, next_seq: 0 };
            return Ok((run, None));
        }

        let manifest: RunManifest =
            serde_json::from_str(&read(&manifest_path)?).map_err(|e| io_err(&manifest_path, e))?;
        if manifest.run_id != run_id {
            return Err(PipelineError::Artifact(format!(
                "{} holds run {} but this premise/config is run {run_id}; use a fresh output directory",
                dir.display(),
                manifest.run_id
            )));
        }
        let state_path = dir.join(STATE_FILE);
        let state: StoryState = serde_json::from_str(&read(&state_path)?).map_err(|e| io_err(&state_path, e))?;
        let kg = TemporalKg::load(&dir.join(KG_FILE)).map_err(|e| PipelineError::Artifact(e.to_string()))?;
        let cache = dir.join(EMBEDDINGS_FILE);
        if cache.exists() {
            kg.load_cache(&cache).map_err(|e| PipelineError::Artifact(e.to_string()))?;
        }
        let trace_path = dir.join(TRACE_FILE);
        let next_seq = if trace_path.exists() {
            read(&trace_path)?.lines().filter(|l| !l.trim().is_empty()).count() as u64
        } else {
            0
        };
        let run = Self { dir: dir.to_path_buf(), manifest, trace, flushed, next_seq };
        Ok((run, Some(Resumed { state, kg })))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    fn append_trace(&mut self, entries: &[TraceEntry]) -> Result<(), PipelineError> {
        let path = self.dir.join(TRACE_FILE);
        let mut text = String::new();
        for e in entries {
            let mut e = e.clone();
            e.seq = self.next_seq;
            self.next_seq += 1;
            text.push_str(&serde_json::to_string(&e).expect("trace entry serializes"));
            text.push('\n');
            self.manifest.ledger.add(&e.template_id);
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| io_err(&path, e))?;
        f.sync_all().map_err(|e| io_err(&path, e))
    }

    /// Writes every artifact for the current state.
    pub fn save(&mut self, state: &StoryState, kg: &TemporalKg) -> Result<(), PipelineError> {
        let delta = self.trace.since(self.flushed);
        self.flushed += delta.len();
        self.append_trace(&delta)?;

        let d = self.dir.clone();
        kg.save(&d.join(KG_FILE)).map_err(|e| PipelineError::Artifact(e.to_string()))?;
        kg.save_cache(&d.join(EMBEDDINGS_FILE))
            .map_err(|e| PipelineError::Artifact(e.to_string()))?;
        let mut state_json = serde_json::to_string_pretty(state).expect("state serializes");
        state_json.push('\n');
        write(&d.join(STATE_FILE), &state_json)?;
        let outline = match &state.rough {
            Some(r) => OutlineDocument::from_parts(&state.theory.name, r, &state.detailed),
            None => OutlineDocument { theory: state.theory.name.clone(), stages: Vec::new() },
        };
        write(&d.join(OUTLINE_FILE), &outline.to_json())?;
        write(&d.join(STORY_FILE), &render_story(&state.chapters))?;
        let mut ledger = serde_json::to_string_pretty(&self.manifest.ledger).expect("ledger serializes");
        ledger.push('\n');
        write(&d.join(LEDGER_FILE), &ledger)?;
        if !d.join(TRACE_FILE).exists() {
            write(&d.join(TRACE_FILE), "")?;
        }

        self.manifest.completed_steps = state.completed_steps().iter().map(StepId::to_string).collect();
        self.manifest.complete = state.is_complete();
        self.manifest.updated_at = now();
        let mut manifest = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        manifest.push('\n');
        write(&d.join(MANIFEST_FILE), &manifest)
    }
}

impl Checkpoint for RunDir {
    fn commit(&mut self, _step: StepId, state: &StoryState, kg: &TemporalKg) -> Result<(), PipelineError> {
        self.save(state, kg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outline_document_round_trips() {
        let rough = RoughOutline {
            entries: vec![
                StageEntry { stage: "Exposition".into(), outline: "a".into() },
                StageEntry { stage: "Climax".into(), outline: "b".into() },
            ],
        };
        let detailed = vec![DetailedOutline { stage_index: 1, items: vec!["x".into(), "y".into()] }];
        let doc = OutlineDocument::from_parts("theory", &rough, &detailed);
        let back = OutlineDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_parts(), (rough, detailed));
    }

    #[test]
    fn story_document_headers() {
        let ch = |n: u32, t: &str| Chapter { number: n, stage: 1, item: n as usize, outline: String::new(), text: t.into() };
        assert_eq!(
            render_story(&[ch(1, "One."), ch(2, " Two. ")]),
            "# Chapter 1\n\nOne.\n\n# Chapter 2\n\nTwo.\n"
        );
    }
}
