//! Shared helpers for the CLI integration and acceptance tests: a
//! deterministic stand-in model and the replay fixture it produces.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storyloom_core::analyzer::{analyze, AnalyzerOptions, Judge};
use storyloom_core::gateway::prompts::{
    DETAILED_OUTLINE, EXTRACT_QUERY, EXTRACT_TRIPLES, GEN_STORY, RELEVANCE, ROUGH_OUTLINE,
};
use storyloom_core::gateway::{
    text_digest, CallTrace, CompletionRequest, Embedder, Gateway, GatewayError, HashEmbedder, PromptCatalog,
    ReplayFixture, ResponderBackend,
};
use storyloom_core::memory::TemporalKg;
use storyloom_core::pipeline::{MemoryCheckpoint, Pipeline, PipelineConfig, StoryPremise, StoryState, WritingTheory};

pub const EMBED_DIM: usize = 64;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub fn premise_path() -> PathBuf {
    data_dir().join("sample_premise.txt")
}

pub fn fixture_path() -> PathBuf {
    data_dir().join("sample_run.fixture.jsonl")
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_storyloom"))
}

/// Runs the CLI with networking disabled.
pub fn storyloom(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env("NO_NETWORK", "1")
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn storyloom")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value of a `key: value` line.
pub fn field(text: &str, key: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")).map(|v| v.trim().to_string()))
}

fn rng_for(parts: &[&str]) -> ChaCha8Rng {
    let digest = text_digest(&parts.join("\u{1e}"));
    let mut seed = [0u8; 32];
    for (i, chunk) in digest.as_bytes().chunks(2).enumerate().take(16) {
        seed[i] = u8::from_str_radix(std::str::from_utf8(chunk).unwrap(), 16).unwrap();
    }
    ChaCha8Rng::from_seed(seed)
}

const PEOPLE: [(&str, &str); 4] = [
    ("Shannon", "Shannon Doyle"),
    ("Gary", "Gary Saunders"),
    ("Mike", "Mike Doyle"),
    ("Lena", "Lena Saunders"),
];

const DEEDS: [(&str, &str); 10] = [
    ("visits", "inner city"),
    ("interviews", "local residents"),
    ("writes", "feature article"),
    ("meets", "newspaper editor"),
    ("walks through", "crowded market"),
    ("finds", "old notebook"),
    ("argues with", "landlord"),
    ("protects", "corner shop"),
    ("remembers", "father's advice"),
    ("questions", "city council"),
];

const STATES: [(&str, &str); 6] = [
    ("is", "determined"),
    ("is", "exhausted"),
    ("seems", "hopeful"),
    ("is", "afraid"),
    ("becomes", "confident"),
    ("was", "lonely"),
];

fn people_in(text: &str) -> Vec<&'static str> {
    let found: Vec<&str> = PEOPLE
        .iter()
        .filter(|(short, _)| text.contains(short))
        .map(|(_, full)| *full)
        .collect();
    if found.is_empty() {
        vec![PEOPLE[0].1]
    } else {
        found
    }
}

fn rough_outline(req: &CompletionRequest<'_>) -> String {
    let n: usize = req.bindings["stage count"].parse().unwrap_or(5);
    let labels = WritingTheory::default().labels().iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let beats = [
        "Mike Doyle dies and Shannon decides to become a journalist like him.",
        "Shannon takes a feature on the inner city and meets Gary, who shows her its hard side.",
        "Shannon witnesses a crisis in Gary's neighbourhood and must choose what story to tell.",
        "Shannon and Gary face the consequences while Lena keeps the corner shop open.",
        "Shannon publishes a truthful story and Gary finds a new path.",
    ];
    let objs: Vec<String> = (0..n)
        .map(|i| {
            let label = labels.get(i).cloned().unwrap_or_else(|| format!("Stage {}", i + 1));
            format!(
                "    {{\n        \"stage\": \"{label}\",\n        \"outline\": \"{}\"\n    }}",
                beats[i % beats.len()]
            )
        })
        .collect();
    format!("```json\n[\n{}\n]\n```", objs.join(",\n"))
}

fn detailed_outline(req: &CompletionRequest<'_>) -> String {
    let m: usize = req.bindings["chapter count"].parse().unwrap_or(3);
    let volume = &req.bindings["volume outline"];
    let stage = &req.bindings["stage"];
    let mut rng = rng_for(&[volume, stage]);
    let who = people_in(volume);
    (1..=m)
        .map(|t| {
            let a = who.choose(&mut rng).unwrap();
            let b = PEOPLE.choose(&mut rng).unwrap().1;
            let (verb, obj) = DEEDS.choose(&mut rng).unwrap();
            format!("- Chapter Outline {t}: During the {stage} stage, {a} {verb} the {obj} and talks with {b}.")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn story(req: &CompletionRequest<'_>) -> String {
    let outline = &req.bindings["outline"];
    let mut rng = rng_for(&[outline]);
    let who = people_in(outline);
    let mut sentences = Vec::new();
    for _ in 0..rng.random_range(6..10) {
        let a = *who.choose(&mut rng).unwrap();
        if rng.random_bool(0.3) {
            let (verb, adj) = STATES.choose(&mut rng).unwrap();
            sentences.push(format!("{a} {verb} {adj}."));
        } else {
            let (verb, obj) = DEEDS.choose(&mut rng).unwrap();
            let when = ["in the morning", "after dark", "before the rain", "at noon"].choose(&mut rng).unwrap();
            sentences.push(format!("{a} {verb} the {obj} {when}."));
        }
    }
    format!("- Story:\n{}", sentences.join(" "))
}

fn triples(text: &str) -> String {
    let mut out = Vec::new();
    for sentence in text.split('.') {
        let s = sentence.trim();
        let Some((_, full)) = PEOPLE.iter().find(|(short, _)| s.contains(short)) else { continue };
        let found = DEEDS
            .iter()
            .chain(STATES.iter())
            .find(|(verb, obj)| s.contains(&format!(" {verb} ")) && s.contains(obj));
        let (verb, obj) = match found {
            Some(p) => *p,
            None => {
                let mut rng = rng_for(&[s]);
                *DEEDS.choose(&mut rng).unwrap()
            }
        };
        out.push(format!("({full}, {verb}, {obj})"));
    }
    if out.is_empty() {
        out.push("(inner city, is, large metropolitan area)".into());
    }
    out.dedup();
    out.iter()
        .enumerate()
        .map(|(i, t)| format!("{}.{t}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn relevance(req: &CompletionRequest<'_>) -> String {
    let mut rng = rng_for(&[&req.bindings["outline"], &req.bindings["triplesentence"]]);
    let bits: Vec<u8> = (0..5).map(|_| rng.random_range(0..2)).collect();
    let sum: u8 = bits.iter().sum();
    let mut s = String::from("Part1 Score Results and their Reasons:\n");
    for (i, b) in bits.iter().enumerate() {
        s.push_str(&format!("for criterion {}. My result is: add {b}.Because: checked.\n", i + 1));
    }
    let expr = bits.iter().map(u8::to_string).collect::<Vec<_>>().join("+");
    s.push_str(&format!("Part2 Sum Up:\nSumming up all the score results for each criterion:\n{expr}={sum}\nPart3 total score\nScore: {sum}"));
    s
}

fn describe(req: &CompletionRequest<'_>) -> String {
    format!("Summary of the grouped facts: {}.", req.bindings["inlist"])
}

fn judge(req: &CompletionRequest<'_>) -> String {
    let mut rng = rng_for(&[&req.bindings["description"]]);
    let y = rng.random_bool(0.2);
    format!(
        "```json\n{{\"result\": \"{}\", \"explanation\": \"{}\"}}\n```",
        if y { "Y" } else { "N" },
        if y { "the states cannot hold together" } else { "the changes are plausible over time" }
    )
}

/// Deterministic stand-in for a chat model, keyed on template id and
/// bindings only.
pub fn synthetic_model(req: &CompletionRequest<'_>) -> Result<String, GatewayError> {
    Ok(match req.template_id {
        ROUGH_OUTLINE => rough_outline(req),
        DETAILED_OUTLINE => detailed_outline(req),
        GEN_STORY => story(req),
        EXTRACT_TRIPLES | EXTRACT_QUERY => triples(&req.bindings["text"]),
        RELEVANCE => relevance(req),
        id if id.starts_with("describe_rule") => describe(req),
        id if id.starts_with("judge_rule") => judge(req),
        other => return Err(GatewayError::UnknownTemplate(other.to_string())),
    })
}

/// Answer for query extractions not recorded in the fixture.
pub const QUERY_DEFAULT: &str = "1.(nobody, visits, nowhere)";

/// Runs the full pipeline and a model-judged analysis against the synthetic
/// model and records every exchange.
pub fn build_fixture() -> ReplayFixture {
    let premise = StoryPremise::parse(&std::fs::read_to_string(premise_path()).unwrap()).unwrap();
    let trace = CallTrace::new();
    let gateway = Gateway::new(
        Arc::new(ResponderBackend::new(synthetic_model)),
        PromptCatalog::builtin(),
        trace.clone(),
    );
    let embedder = Embedder::new(Arc::new(HashEmbedder::new(EMBED_DIM)), trace.clone());
    let config = PipelineConfig::default();
    let mut state = StoryState::new(premise, WritingTheory::default(), &config);
    let mut kg = TemporalKg::new();
    let pipeline = Pipeline { config: &config, gateway: &gateway, embedder: &embedder };
    pipeline.run(&mut state, &mut kg, &mut MemoryCheckpoint::default(), None).unwrap();
    analyze(&kg, Judge::Model(&gateway), &AnalyzerOptions::default()).unwrap();
    let mut fixture = ReplayFixture::from_trace(trace.snapshot().iter());
    fixture.set_default(EXTRACT_QUERY, QUERY_DEFAULT);
    fixture
}

/// Replay config pointing at the committed fixture.
pub fn write_replay_config(dir: &Path) -> PathBuf {
    let path = dir.join("replay.toml");
    let text = format!(
        "mode = \"replay\"\nfixture = {}\nembedder = \"hash\"\nembed_dim = {EMBED_DIM}\n",
        toml_str(&fixture_path().to_string_lossy())
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn toml_str(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}
