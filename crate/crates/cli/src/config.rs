//! Run configuration: a flat TOML file with `--set key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use storyloom_core::analyzer::{AnalyzerOptions, GroupingOptions, GroupingPolicy, DEFAULT_ATTRIBUTE_ACTIONS, DEFAULT_CHUNK_SIZE};
use storyloom_core::gateway::{ProviderConfig, NO_NETWORK_ENV};
use storyloom_core::memory::{RetrievalSettings, DEFAULT_THRESHOLD, DEFAULT_TOP_K};
use storyloom_core::metrics::{EntropyBase, MetricOptions};
use storyloom_core::pipeline::PipelineConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    /// Deterministic hash vectors; no network.
    Hash,
    /// The provider's `/embeddings` endpoint.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub fixture: Option<PathBuf>,

    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub retry_limit: u32,
    pub timeout_secs: u64,

    /// `hash` or `http`; unset means `http` when live and `hash` in replay.
    pub embedder: Option<EmbedderKind>,
    pub embed_endpoint: Option<String>,
    pub embed_model: String,
    pub embed_dim: usize,

    pub chapters_per_stage: usize,
    pub max_stages: Option<usize>,
    pub threshold: f64,
    pub top_k: usize,
    pub memory: bool,
    pub history_rounds: usize,

    pub entropy_base: String,
    pub cross_chapter_bigrams: bool,

    pub grouping_policy: GroupingPolicy,
    pub exclude_premise: bool,
    pub rule5_actions: Vec<String>,
    pub chunk_size: usize,
    /// Rules whose groups the stub judge flags as conflicts.
    pub stub_judge_rules: Vec<u8>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let provider = ProviderConfig::default();
        Self {
            mode: Mode::Live,
            fixture: None,
            endpoint: provider.endpoint,
            model: provider.model_name,
            api_key_env: provider.api_key_ref,
            temperature: provider.temperature,
            max_tokens: provider.max_tokens,
            retry_limit: provider.retry_limit,
            timeout_secs: provider.timeout_secs,
            embedder: None,
            embed_endpoint: None,
            embed_model: "text-embedding-3-small".into(),
            embed_dim: 64,
            chapters_per_stage: 3,
            max_stages: None,
            threshold: DEFAULT_THRESHOLD,
            top_k: DEFAULT_TOP_K,
            memory: true,
            history_rounds: 2,
            entropy_base: "e".into(),
            cross_chapter_bigrams: false,
            grouping_policy: GroupingPolicy::Consume,
            exclude_premise: false,
            rule5_actions: DEFAULT_ATTRIBUTE_ACTIONS.iter().map(|s| s.to_string()).collect(),
            chunk_size: DEFAULT_CHUNK_SIZE,
            stub_judge_rules: vec![1, 2, 3, 4, 5],
        }
    }
}

fn parse_override(item: &str) -> Result<(String, toml::Value), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("--set expects key=value, got {item:?}")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    // values that are not valid TOML literals are taken as plain strings
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

impl RunConfig {
    /// Defaults, then the file, then `--set` overrides. `NO_NETWORK=1`
    /// forces replay mode.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        if let Some(dir) = file.and_then(Path::parent) {
            // relative fixture paths are resolved against the config file
            if let Some(toml::Value::String(f)) = table.get("fixture") {
                let p = Path::new(f);
                if p.is_relative() {
                    let joined = dir.join(p).to_string_lossy().into_owned();
                    table.insert("fixture".into(), toml::Value::String(joined));
                }
            }
        }
        for item in overrides {
            let (k, v) = parse_override(item)?;
            table.insert(k, v);
        }
        let mut config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::input(format!("config: {}", e.message())))?;
        if std::env::var(NO_NETWORK_ENV).is_ok_and(|v| v == "1") {
            config.mode = Mode::Replay;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(CliError::input(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.top_k == 0 || self.chapters_per_stage == 0 || self.embed_dim == 0 || self.chunk_size == 0 {
            return Err(CliError::input("top_k, chapters_per_stage, embed_dim and chunk_size must be positive"));
        }
        if self.max_stages == Some(0) {
            return Err(CliError::input("max_stages must be positive"));
        }
        if EntropyBase::parse(&self.entropy_base).is_none() {
            return Err(CliError::input(format!("entropy_base must be \"e\" or \"2\", got {:?}", self.entropy_base)));
        }
        if let Some(r) = self.stub_judge_rules.iter().find(|r| !(1..=5).contains(*r)) {
            return Err(CliError::input(format!("stub_judge_rules: no rule {r}")));
        }
        self.provider().validate().map_err(|e| CliError::input(e.to_string()))
    }

    pub fn provider(&self) -> ProviderConfig {
        ProviderConfig {
            endpoint: self.endpoint.clone(),
            model_name: self.model.clone(),
            api_key_ref: self.api_key_env.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            retry_limit: self.retry_limit,
            timeout_secs: self.timeout_secs,
        }
    }

    pub fn embed_provider(&self) -> ProviderConfig {
        ProviderConfig {
            endpoint: self.embed_endpoint.clone().unwrap_or_else(|| self.endpoint.clone()),
            model_name: self.embed_model.clone(),
            ..self.provider()
        }
    }

    pub fn embedder_kind(&self) -> EmbedderKind {
        self.embedder.unwrap_or(match self.mode {
            Mode::Live => EmbedderKind::Http,
            Mode::Replay => EmbedderKind::Hash,
        })
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            chapters_per_stage: self.chapters_per_stage,
            retrieval: RetrievalSettings {
                threshold: self.threshold,
                top_k: self.top_k,
            },
            memory: self.memory,
            history_rounds: self.history_rounds,
            max_stages: self.max_stages,
        }
    }

    pub fn analyzer(&self) -> AnalyzerOptions {
        AnalyzerOptions {
            grouping: GroupingOptions {
                policy: self.grouping_policy,
                exclude_premise: self.exclude_premise,
                attribute_actions: self.rule5_actions.clone(),
            },
            chunk_size: self.chunk_size,
        }
    }

    pub fn metrics(&self) -> MetricOptions {
        MetricOptions {
            base: EntropyBase::parse(&self.entropy_base).unwrap_or_default(),
            cross_chapters: self.cross_chapter_bigrams,
        }
    }

    /// Settings that shape generated content; these determine the run id.
    /// Transport details (timeouts, retries, fixture location) are left out.
    pub fn generation_snapshot(&self) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "embedder": self.embedder_kind(),
            "embed_model": self.embed_model,
            "embed_dim": self.embed_dim,
            "pipeline": self.pipeline(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "top_k = 5\nthreshold = 0.8\nfixture = \"fx.jsonl\"\n").unwrap();
        let c = RunConfig::load(Some(&path), &["top_k=7".into(), "model=my-model".into()]).unwrap();
        assert_eq!(c.top_k, 7);
        assert_eq!(c.threshold, 0.8);
        assert_eq!(c.model, "my-model");
        assert_eq!(c.chapters_per_stage, 3);
        assert_eq!(c.fixture, Some(dir.path().join("fx.jsonl")));
    }

    #[test]
    fn invalid_settings_are_input_errors() {
        let replay = RunConfig::load(None, &["mode=replay".into()]).unwrap();
        let err = crate::commands::Providers::from_config(&replay).err().unwrap();
        assert_eq!(err.code, 2);
        assert_eq!(RunConfig::load(None, &["threshold=1.5".into()]).unwrap_err().code, 2);
        assert_eq!(RunConfig::load(None, &["no_such_key=1".into()]).unwrap_err().code, 2);
        assert_eq!(RunConfig::load(None, &["entropy_base=10".into()]).unwrap_err().code, 2);
        assert_eq!(RunConfig::load(None, &["oops".into()]).unwrap_err().code, 2);
    }

    #[test]
    fn list_and_enum_overrides() {
        let c = RunConfig::load(
            None,
            &[
                "stub_judge_rules=[2]".into(),
                "grouping_policy=overlap".into(),
                "embedder=hash".into(),
                "fixture=fx.jsonl".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.stub_judge_rules, vec![2]);
        assert_eq!(c.grouping_policy, GroupingPolicy::Overlap);
        assert_eq!(c.embedder_kind(), EmbedderKind::Hash);
    }
}
