//! Parsing judge completions.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictVerdict {
    /// `Y` in the judge's answer.
    pub conflict: bool,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerdictParseError {
    #[error("no Y/N result in judge output")]
    NoResult,
    #[error("result {0:?} is neither Y nor N")]
    BadResult(String),
}

fn fence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[A-Za-z]*[ \t]*\r?\n(.*?)```").unwrap())
}

fn object_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)\{.*\}").unwrap())
}

fn result_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?i)"?result"?\s*:\s*"?'?([A-Za-z]+)"#).unwrap())
}

fn explanation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?is)"?explanation"?\s*:\s*"?(.*?)"?\s*\}?\s*$"#).unwrap())
}

fn to_flag(result: &str) -> Result<bool, VerdictParseError> {
    match result.trim().to_ascii_uppercase().as_str() {
        "Y" | "YES" => Ok(true),
        "N" | "NO" => Ok(false),
        _ => Err(VerdictParseError::BadResult(result.trim().to_string())),
    }
}

/// Reads `{"result": "Y"|"N", "explanation": ...}` from a fenced block or a
/// bare object, falling back to a lenient key scan for malformed JSON.
pub fn parse_verdict(completion: &str) -> Result<ConflictVerdict, VerdictParseError> {
    let candidates = fence_re()
        .captures_iter(completion)
        .map(|c| c.get(1).unwrap().as_str().to_string())
        .chain(object_re().find(completion).map(|m| m.as_str().to_string()));
    for text in candidates {
        if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(text.trim()) {
            if let Some(r) = obj.get("result").and_then(Value::as_str) {
                let conflict = to_flag(r)?;
                let explanation = obj
                    .get("explanation")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string();
                return Ok(ConflictVerdict { conflict, explanation });
            }
        }
    }
    let caps = result_re().captures(completion).ok_or(VerdictParseError::NoResult)?;
    let conflict = to_flag(&caps[1])?;
    let explanation = explanation_re()
        .captures(completion)
        .map(|c| c[1].trim().trim_end_matches(['"', '`']).trim().to_string())
        .unwrap_or_default();
    Ok(ConflictVerdict { conflict, explanation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_objects() {
        let y = parse_verdict("```json\n{\"result\": \"Y\", \"explanation\": \"dead men do not talk\"}\n```").unwrap();
        assert_eq!(y, ConflictVerdict { conflict: true, explanation: "dead men do not talk".into() });
        let n = parse_verdict("Your results:\n```json\n{\"result\": \"N\", \"explanation\": \"fine\"}\n```").unwrap();
        assert!(!n.conflict);
    }

    #[test]
    fn bare_and_lenient_objects() {
        assert!(parse_verdict("{\"result\": \"Y\", \"explanation\": \"x\"}").unwrap().conflict);
        let loose = parse_verdict("```json\n{\n result: 'N'\n explanation: Lily's feelings change over time\n}\n```").unwrap();
        assert!(!loose.conflict);
        assert!(loose.explanation.starts_with("Lily's feelings"));
    }

    #[test]
    fn garbage_is_an_error() {
        assert_eq!(parse_verdict("I am not sure."), Err(VerdictParseError::NoResult));
        assert_eq!(
            parse_verdict("{\"result\": \"maybe\", \"explanation\": \"\"}"),
            Err(VerdictParseError::BadResult("maybe".into()))
        );
    }
}
