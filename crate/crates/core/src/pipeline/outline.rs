//! Rough and detailed outlines: parsing and the generation steps that
//! produce them.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::premise::{StoryPremise, WritingTheory};
use crate::gateway::prompts::{DETAILED_OUTLINE, GEN_STORY, ROUGH_OUTLINE};
use crate::gateway::{Bindings, ChatExchange, ChatHistory, Gateway, GatewayError};
use crate::memory::RelevantContext;

/// Binding text for an absent previous chapter outline or empty context.
pub const EMPTY_MARKER: &str = "None";
pub const STORY_MARKER: &str = "- Story:";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OutlineParseError {
    #[error("no fenced code block in the rough-outline completion")]
    MissingFence,
    #[error("fenced block is not a list of stage objects: {0}")]
    InvalidJson(String),
    #[error("expected {expected} stage entries, found {found}")]
    StageCount { expected: usize, found: usize },
    #[error("stage entry {0} has no outline text")]
    EmptyStage(usize),
    #[error("expected {expected} chapter outlines, found {found}")]
    ChapterCount { expected: usize, found: usize },
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{error} (after {attempts} attempts)")]
    Parse { error: OutlineParseError, attempts: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: String,
    pub outline: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoughOutline {
    pub entries: Vec<StageEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetailedOutline {
    /// 1-based stage number.
    pub stage_index: usize,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

fn fence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[A-Za-z]*[ \t]*\r?\n(.*?)```").unwrap())
}

fn chapter_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*[-*]?\s*\**chapter\s+outline\s*(\d+)\s*\**\s*:\s*(.*)$").unwrap())
}

fn text_field(obj: &serde_json::Map<String, Value>, keys: &[&str]) -> Option<String> {
    keys.iter()
        .find_map(|k| obj.get(*k).and_then(Value::as_str))
        .map(|s| s.trim().to_string())
}

/// Parses the fenced JSON block of a rough-outline completion.
///
/// The block may hold a JSON list or bare comma-separated objects. Entries
/// are matched to stages by position; a label that differs from the theory
/// is replaced by the theory's label with a warning.
pub fn parse_rough_outline(completion: &str, theory: &WritingTheory) -> Result<Parsed<RoughOutline>, OutlineParseError> {
    let block = fence_re()
        .captures(completion)
        .map(|c| c.get(1).unwrap().as_str().trim())
        .ok_or(OutlineParseError::MissingFence)?;
    let value: Value = serde_json::from_str(block)
        .or_else(|_| serde_json::from_str(&format!("[{block}]")))
        .map_err(|e| OutlineParseError::InvalidJson(e.to_string()))?;
    let items = match value {
        Value::Array(items) => items,
        Value::Object(_) => vec![value],
        other => return Err(OutlineParseError::InvalidJson(format!("unexpected {other}"))),
    };
    if items.len() != theory.len() {
        return Err(OutlineParseError::StageCount {
            expected: theory.len(),
            found: items.len(),
        });
    }
    let mut warnings = Vec::new();
    let mut entries = Vec::with_capacity(items.len());
    for (i, (item, stage)) in items.iter().zip(&theory.stages).enumerate() {
        let obj = item
            .as_object()
            .ok_or_else(|| OutlineParseError::InvalidJson(format!("entry {} is not an object", i + 1)))?;
        let outline = text_field(obj, &["outline", "storyline", "content"])
            .filter(|s| !s.is_empty())
            .ok_or(OutlineParseError::EmptyStage(i + 1))?;
        let label = text_field(obj, &["stage", "label"]).unwrap_or_default();
        if !label.eq_ignore_ascii_case(&stage.label) {
            warnings.push(format!("entry {} labelled {label:?}, using stage {:?}", i + 1, stage.label));
        }
        entries.push(StageEntry {
            stage: stage.label.clone(),
            outline,
        });
    }
    Ok(Parsed {
        value: RoughOutline { entries },
        warnings,
    })
}

/// Parses `- Chapter Outline n: text` lines. Unmatched non-blank lines
/// continue the preceding item. More than `m` items are truncated with a
/// warning; fewer is an error.
pub fn parse_detailed_outline(completion: &str, m: usize) -> Result<Parsed<Vec<String>>, OutlineParseError> {
    let mut items: Vec<String> = Vec::new();
    let mut open = false;
    for line in completion.lines() {
        if let Some(c) = chapter_re().captures(line) {
            items.push(c[2].trim().to_string());
            open = true;
        } else if open && !line.trim().is_empty() {
            let last = items.last_mut().unwrap();
            if !last.is_empty() {
                last.push(' ');
            }
            last.push_str(line.trim());
        } else if items.last().is_some_and(|s| !s.is_empty()) {
            // a blank line ends a non-empty item
            open = false;
        }
    }
    let mut warnings = Vec::new();
    let before = items.len();
    items.retain(|s| !s.is_empty());
    if items.len() != before {
        warnings.push(format!("{} empty chapter outlines ignored", before - items.len()));
    }
    if items.len() < m {
        return Err(OutlineParseError::ChapterCount {
            expected: m,
            found: items.len(),
        });
    }
    if items.len() > m {
        warnings.push(format!("{} chapter outlines returned, keeping the first {m}", items.len()));
        items.truncate(m);
    }
    Ok(Parsed { value: items, warnings })
}

/// Removes a leading story marker and surrounding whitespace.
pub fn strip_story_marker(completion: &str) -> &str {
    let t = completion.trim();
    t.strip_prefix(STORY_MARKER)
        .or_else(|| t.strip_prefix("Story:"))
        .unwrap_or(t)
        .trim()
}

fn context_binding(context: &RelevantContext) -> String {
    if context.is_empty() {
        EMPTY_MARKER.to_string()
    } else {
        context.joined()
    }
}

fn chapter_format(m: usize) -> String {
    (1..=m)
        .map(|t| format!("- Chapter Outline {t}: "))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Calls the model, re-sending the identical prompt once if the completion
/// fails to parse.
fn call_parsed<T>(
    gateway: &Gateway,
    template_id: &str,
    bindings: &Bindings,
    history: Option<&mut ChatHistory>,
    parse: impl Fn(&str) -> Result<Parsed<T>, OutlineParseError>,
) -> Result<Parsed<T>, StepError> {
    let mut last_err = None;
    for attempt in 1..=2u32 {
        let exchange = gateway.call_with_history(template_id, bindings, history.as_deref())?;
        match parse(&exchange.completion) {
            Ok(parsed) => {
                if let Some(h) = history {
                    h.push(exchange.rendered_prompt, exchange.completion);
                }
                return Ok(parsed);
            }
            Err(e) => {
                log::warn!("{template_id}: attempt {attempt} unparseable: {e}");
                last_err = Some(e);
            }
        }
    }
    Err(StepError::Parse {
        error: last_err.unwrap(),
        attempts: 2,
    })
}

fn log_warnings(step: &str, warnings: &[String]) {
    for w in warnings {
        log::warn!("{step}: {w}");
    }
}

pub fn rough_outline_bindings(premise: &StoryPremise, theory: &WritingTheory) -> Bindings {
    Bindings::from([
        ("theory".to_string(), theory.to_prompt_text()),
        ("setting".to_string(), premise.setting.clone()),
        ("character".to_string(), premise.characters_text()),
        ("outline".to_string(), premise.storyline_text()),
        ("stage count".to_string(), theory.len().to_string()),
    ])
}

pub fn plan_rough_outline(
    premise: &StoryPremise,
    theory: &WritingTheory,
    gateway: &Gateway,
) -> Result<RoughOutline, StepError> {
    let bindings = rough_outline_bindings(premise, theory);
    let parsed = call_parsed(gateway, ROUGH_OUTLINE, &bindings, None, |c| parse_rough_outline(c, theory))?;
    log_warnings(ROUGH_OUTLINE, &parsed.warnings);
    Ok(parsed.value)
}

pub fn detailed_outline_bindings(
    entry: &StageEntry,
    prev_last_item: Option<&str>,
    context: &RelevantContext,
    m: usize,
) -> Bindings {
    Bindings::from([
        ("volume outline".to_string(), entry.outline.clone()),
        ("stage".to_string(), entry.stage.clone()),
        ("last chapter".to_string(), prev_last_item.unwrap_or(EMPTY_MARKER).to_string()),
        ("history".to_string(), context_binding(context)),
        ("chapter count".to_string(), m.to_string()),
        ("chapter format".to_string(), chapter_format(m)),
    ])
}

pub fn plan_detailed_outline(
    entry: &StageEntry,
    stage_index: usize,
    prev_last_item: Option<&str>,
    context: &RelevantContext,
    m: usize,
    gateway: &Gateway,
    history: Option<&mut ChatHistory>,
) -> Result<DetailedOutline, StepError> {
    let bindings = detailed_outline_bindings(entry, prev_last_item, context, m);
    let parsed = call_parsed(gateway, DETAILED_OUTLINE, &bindings, history, |c| parse_detailed_outline(c, m))?;
    log_warnings(DETAILED_OUTLINE, &parsed.warnings);
    Ok(DetailedOutline {
        stage_index,
        items: parsed.value,
    })
}

pub fn write_chapter(
    item: &str,
    context: &RelevantContext,
    gateway: &Gateway,
    history: Option<&mut ChatHistory>,
) -> Result<String, GatewayError> {
    if item.trim().is_empty() {
        return Err(GatewayError::EmptyInput);
    }
    let bindings = Bindings::from([
        ("outline".to_string(), item.to_string()),
        ("history".to_string(), context_binding(context)),
    ]);
    let exchange: ChatExchange = gateway.call_with_history(GEN_STORY, &bindings, history.as_deref())?;
    let body = strip_story_marker(&exchange.completion).to_string();
    if body.is_empty() {
        return Err(GatewayError::EmptyCompletion);
    }
    if let Some(h) = history {
        h.push(exchange.rendered_prompt, exchange.completion);
    }
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ResponderBackend;
    use crate::pipeline::premise::Stage;

    fn rough_block(labels: &[&str]) -> String {
        let objs: Vec<String> = labels
            .iter()
            .map(|l| format!("{{\"stage\": \"{l}\", \"outline\": \"Things happen in {l}.\"}}"))
            .collect();
        format!("Here it is:\n```json\n[\n{}\n]\n```\n", objs.join(",\n"))
    }

    #[test]
    fn rough_outline_five_entries() {
        let theory = WritingTheory::default();
        let text = rough_block(&["Exposition", "Rising Action", "Climax", "Falling Action", "Resolution"]);
        let parsed = parse_rough_outline(&text, &theory).unwrap();
        assert_eq!(parsed.value.entries.len(), 5);
        assert_eq!(parsed.value.entries[4].stage, "Denouement or Resolution");
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.value.entries[0].outline, "Things happen in Exposition.");
    }

    #[test]
    fn rough_outline_bare_objects_and_custom_theory() {
        let theory = WritingTheory::new(
            "three act",
            ["Setup", "Confrontation", "Resolution"]
                .iter()
                .map(|l| Stage { label: l.to_string(), description: String::new() })
                .collect(),
        )
        .unwrap();
        let text = "```\n{\"stage\": \"Setup\", \"outline\": \"a\"},\n{\"stage\": \"Confrontation\", \"outline\": \"b\"},\n{\"stage\": \"Resolution\", \"outline\": \"c\"}\n```";
        let parsed = parse_rough_outline(text, &theory).unwrap();
        assert_eq!(parsed.value.entries.len(), 3);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn rough_outline_errors() {
        let theory = WritingTheory::default();
        assert_eq!(
            parse_rough_outline(&rough_block(&["a", "b", "c", "d"]), &theory),
            Err(OutlineParseError::StageCount { expected: 5, found: 4 })
        );
        assert_eq!(parse_rough_outline("no block", &theory), Err(OutlineParseError::MissingFence));
        assert!(matches!(
            parse_rough_outline("```json\n[{oops\n```", &theory),
            Err(OutlineParseError::InvalidJson(_))
        ));
    }

    #[test]
    fn detailed_outline_counts() {
        let three = "- Chapter Outline 1: A.\n- Chapter Outline 2: B.\n- Chapter Outline 3: C.";
        assert_eq!(parse_detailed_outline(three, 3).unwrap().value, ["A.", "B.", "C."]);
        let four = format!("{three}\n- Chapter Outline 4: D.");
        let parsed = parse_detailed_outline(&four, 3).unwrap();
        assert_eq!(parsed.value, ["A.", "B.", "C."]);
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(
            parse_detailed_outline("- Chapter Outline 1: A.\n- Chapter Outline 2: B.", 3),
            Err(OutlineParseError::ChapterCount { expected: 3, found: 2 })
        );
    }

    #[test]
    fn detailed_outline_continuation_lines() {
        let text = "Your result:\n- Chapter Outline 1:\nShannon arrives.\nShe is nervous.\n\n- Chapter Outline 2: Gary helps.";
        assert_eq!(
            parse_detailed_outline(text, 2).unwrap().value,
            ["Shannon arrives. She is nervous.", "Gary helps."]
        );
    }

    #[test]
    fn story_marker() {
        assert_eq!(strip_story_marker("- Story:\nOnce upon a time."), "Once upon a time.");
        assert_eq!(strip_story_marker("Plain text."), "Plain text.");
        let gw = Gateway::with_backend(ResponderBackend::new(|_| Ok("- Story:".into())));
        assert!(matches!(
            write_chapter("x", &RelevantContext::default(), &gw, None),
            Err(GatewayError::EmptyCompletion)
        ));
    }

    #[test]
    fn retry_resends_identical_prompt_then_fails() {
        let gw = Gateway::with_backend(ResponderBackend::new(|_| Ok("no fence here".into())));
        let err = plan_rough_outline(
            &StoryPremise::parse("Setting\nx\nCharacter Introduction\nA: b\nNecessary Storyline\n1. c").unwrap(),
            &WritingTheory::default(),
            &gw,
        )
        .unwrap_err();
        assert!(matches!(err, StepError::Parse { error: OutlineParseError::MissingFence, attempts: 2 }));
        let trace = gw.trace().snapshot();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace[0].prompt, trace[1].prompt);
    }

    #[test]
    fn first_stage_uses_empty_marker_and_context_is_verbatim() {
        let gw = Gateway::with_backend(ResponderBackend::new(|_| {
            Ok("- Chapter Outline 1: a\n- Chapter Outline 2: b\n- Chapter Outline 3: c".into())
        }));
        let ctx = RelevantContext {
            sentences: vec!["Gary lives in inner city in chapter 0".into()],
            source_ids: vec![vec![0]],
        };
        let entry = StageEntry { stage: "Exposition".into(), outline: "Shannon starts out.".into() };
        plan_detailed_outline(&entry, 1, None, &ctx, 3, &gw, None).unwrap();
        let prompt = &gw.trace().snapshot()[0].prompt;
        assert!(prompt.contains("the outline of the previous chapter: None"));
        assert!(prompt.contains("Gary lives in inner city in chapter 0"));
    }
}
