//! Command implementations. Each writes its `key: value` lines to `out`.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use storyloom_core::analyzer::{analyze, Judge, QuadrupleGroup};
use storyloom_core::gateway::{
    text_digest, CallTrace, ChatBackend, Embedder, EmbeddingBackend, Gateway, HashEmbedder, HttpEmbedder,
    OpenAiBackend, PromptCatalog, ReplayFixture, ScriptedBackend,
};
use storyloom_core::memory::{query_relevant, TemporalKg};
use storyloom_core::metrics::evaluate_story;
use storyloom_core::pipeline::artifacts::EMBEDDINGS_FILE;
use storyloom_core::pipeline::{Pipeline, RunDir, StepId, StoryPremise, StoryState, WritingTheory};

use crate::config::{EmbedderKind, Mode, RunConfig};
use crate::error::CliError;

/// Chat and embedding handles sharing one call trace.
pub struct Providers {
    pub gateway: Gateway,
    pub embedder: Embedder,
    pub trace: CallTrace,
}

impl Providers {
    pub fn from_config(config: &RunConfig) -> Result<Self, CliError> {
        let trace = CallTrace::new();
        let backend: Arc<dyn ChatBackend> = match config.mode {
            Mode::Replay => {
                let path = config.fixture.as_deref().ok_or_else(|| CliError::input("replay mode requires a fixture path (set `fixture`)"))?;
                let fixture = ReplayFixture::load(path).map_err(|e| CliError::input(format!("fixture: {e}")))?;
                Arc::new(ScriptedBackend::new(fixture))
            }
            Mode::Live => Arc::new(OpenAiBackend::new(config.provider())?),
        };
        let embed: Arc<dyn EmbeddingBackend> = match config.embedder_kind() {
            EmbedderKind::Hash => Arc::new(HashEmbedder::new(config.embed_dim)),
            EmbedderKind::Http => Arc::new(HttpEmbedder::new(config.embed_provider())?),
        };
        Ok(Self {
            gateway: Gateway::new(backend, PromptCatalog::builtin(), trace.clone()),
            embedder: Embedder::new(embed, trace.clone()),
            trace,
        })
    }
}

fn read_input(path: &Path, what: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{what} {}: {e}", path.display())))
}

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::input(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, line: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::new(1, format!("stdout: {e}")))
}

fn load_kg(path: &Path) -> Result<TemporalKg, CliError> {
    let text = read_input(path, "kg")?;
    TemporalKg::from_jsonl(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Identity of a generation run: premise, theory and content-shaping settings.
pub fn run_id(premise: &StoryPremise, theory: &WritingTheory, config: &RunConfig) -> String {
    let theory = serde_json::to_string(theory).expect("theory serializes");
    text_digest(&format!("{}\u{1e}{theory}\u{1e}{}", premise.to_text(), config.generation_snapshot()))
}

pub fn cmd_generate(
    premise_path: &Path,
    config: &RunConfig,
    out_dir: &Path,
    halt_after: Option<StepId>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let premise = StoryPremise::parse(&read_input(premise_path, "premise")?)?;
    let theory = WritingTheory::default();
    let providers = Providers::from_config(config)?;
    let id = run_id(&premise, &theory, config);
    let snapshot = serde_json::to_value(config).expect("config serializes");
    let (mut dir, resumed) = RunDir::open(out_dir, &id, snapshot, providers.trace.clone())?;
    let pipeline_config = config.pipeline();
    let (mut state, mut kg) = match resumed {
        Some(r) => {
            log::info!("resuming run {id} at {:?}", r.state.next_step());
            (r.state, r.kg)
        }
        None => (StoryState::new(premise, theory, &pipeline_config), TemporalKg::new()),
    };
    let pipeline = Pipeline {
        config: &pipeline_config,
        gateway: &providers.gateway,
        embedder: &providers.embedder,
    };
    pipeline.run(&mut state, &mut kg, &mut dir, halt_after)?;
    dir.save(&state, &kg)?;

    let ledger = &dir.manifest().ledger;
    emit(out, format!("run_id: {id}"))?;
    emit(out, format!("chapters: {}", state.chapters.len()))?;
    emit(out, format!("quadruples: {}", kg.len()))?;
    emit(out, format!("api_calls: {}", ledger.total))?;
    emit(out, format!("kg_construction_calls: {}", ledger.kg_construction))?;
    emit(out, format!("out: {}", out_dir.display()))
}

pub fn cmd_analyze(
    kg_path: &Path,
    config: &RunConfig,
    stub_judge: bool,
    out_path: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let kg = load_kg(kg_path)?;
    let options = config.analyzer();
    let rules = config.stub_judge_rules.clone();
    let predicate = move |g: &QuadrupleGroup| rules.contains(&g.rule_id);
    let providers;
    let judge = if stub_judge {
        Judge::Stub(&predicate)
    } else {
        providers = Providers::from_config(config)?;
        Judge::Model(&providers.gateway)
    };
    let report = analyze(&kg, judge, &options)?;
    write_output(out_path, &report.to_json())?;
    emit(out, format!("N: {}", report.n_total))?;
    emit(out, format!("m: {}", report.m))?;
    emit(out, format!("groups: {}", report.groups_total))?;
    emit(out, format!("unjudged: {}", report.groups_unjudged))?;
    emit(out, report.cr_line())
}

pub fn cmd_eval(
    story_path: &Path,
    kg_path: Option<&Path>,
    config: &RunConfig,
    stub_judge: bool,
    out_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let story = read_input(story_path, "story")?;
    if story.trim().is_empty() {
        return Err(CliError::input(format!("story {} is empty", story_path.display())));
    }
    let kg = kg_path.map(load_kg).transpose()?;
    let options = config.analyzer();
    let rules = config.stub_judge_rules.clone();
    let predicate = move |g: &QuadrupleGroup| rules.contains(&g.rule_id);
    let providers;
    let conflict = match &kg {
        None => None,
        Some(kg) if stub_judge => Some((kg, Judge::Stub(&predicate), &options)),
        Some(kg) => {
            providers = Providers::from_config(config)?;
            Some((kg, Judge::Model(&providers.gateway), &options))
        }
    };
    let report = evaluate_story(&story, config.metrics(), conflict)?;
    if let Some(p) = out_path {
        write_output(p, &report.to_json())?;
    }
    for line in report.lines() {
        emit(out, line)?;
    }
    Ok(())
}

pub fn cmd_kg_inspect(kg_path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let stats = load_kg(kg_path)?.stats();
    emit(out, format!("nodes: {}", stats.nodes))?;
    emit(out, format!("relations: {}", stats.relations))?;
    emit(out, format!("quadruples: {}", stats.quadruples))?;
    emit(out, "# nodes = distinct entities, relations = distinct actions, quadruples = stored records")
}

pub fn cmd_kg_query(kg_path: &Path, text: &str, config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if text.trim().is_empty() {
        return Err(CliError::input("query text is empty"));
    }
    let kg = load_kg(kg_path)?;
    let cache = kg_path.with_file_name(EMBEDDINGS_FILE);
    if cache.exists() {
        kg.load_cache(&cache)?;
    }
    let providers = Providers::from_config(config)?;
    let context = query_relevant(&kg, text, &config.pipeline().retrieval, &providers.gateway, &providers.embedder)?;
    if context.is_empty() {
        return emit(out, "no relevant content");
    }
    for sentence in &context.sentences {
        emit(out, sentence)?;
    }
    Ok(())
}
