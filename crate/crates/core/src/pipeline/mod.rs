//! Dynamic hierarchical outlining: a stage-level rough outline planned once,
//! then per-stage chapter outlines expanded lazily and interleaved with
//! chapter writing and memory updates.

pub mod artifacts;
pub mod outline;
pub mod premise;
pub mod run;

pub use artifacts::{render_story, OutlineDocument, Resumed, RunDir, RunManifest};
pub use outline::{
    parse_detailed_outline, parse_rough_outline, plan_detailed_outline, plan_rough_outline, strip_story_marker,
    write_chapter, DetailedOutline, OutlineParseError, RoughOutline, StageEntry, StepError, EMPTY_MARKER,
};
pub use premise::{Character, PremiseError, Stage, StoryPremise, TheoryError, WritingTheory};
pub use run::{
    Chapter, Checkpoint, MemoryCheckpoint, Pipeline, PipelineConfig, PipelineError, StepId, StoryState,
};
