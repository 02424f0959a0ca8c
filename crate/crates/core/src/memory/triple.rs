use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Pronouns that may not stand alone as a triple element.
pub const BANNED_PRONOUNS: [&str; 7] = ["he", "she", "it", "they", "that", "there", "those"];

/// Placeholder the extraction prompt asks for when a pronoun cannot be
/// resolved.
pub const UNRESOLVED_PLACEHOLDER: &str = "someone";

/// Case-folded, whitespace-collapsed form used for matching and indexing.
pub fn normalize_entity(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub action: String,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TripleError {
    EmptyField(&'static str),
    Pronoun(&'static str, String),
}

impl fmt::Display for TripleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyField(field) => write!(f, "{field} is empty"),
            Self::Pronoun(field, p) => write!(f, "{field} is the bare pronoun `{p}`"),
        }
    }
}

impl Triple {
    /// Trims every field and rejects empty fields or bare pronouns.
    pub fn new(subject: &str, action: &str, object: &str) -> Result<Self, TripleError> {
        let fields = [("subject", subject), ("action", action), ("object", object)];
        for (name, value) in fields {
            let norm = normalize_entity(value);
            if norm.is_empty() {
                return Err(TripleError::EmptyField(name));
            }
            if BANNED_PRONOUNS.contains(&norm.as_str()) {
                return Err(TripleError::Pronoun(name, norm));
            }
        }
        Ok(Self {
            subject: subject.trim().to_string(),
            action: action.trim().to_string(),
            object: object.trim().to_string(),
        })
    }

    /// Normalized `(subject, action, object)` key.
    pub fn key(&self) -> (String, String, String) {
        (
            normalize_entity(&self.subject),
            normalize_entity(&self.action),
            normalize_entity(&self.object),
        )
    }

    /// True when subject or object is the unresolved-pronoun placeholder.
    pub fn has_placeholder(&self) -> bool {
        normalize_entity(&self.subject) == UNRESOLVED_PLACEHOLDER
            || normalize_entity(&self.object) == UNRESOLVED_PLACEHOLDER
    }

    /// "subject action object"
    pub fn sentence(&self) -> String {
        format!("{} {} {}", self.subject, self.action, self.object)
    }
}

/// A triple stamped with the chapter it came from (0 = premise).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Quadruple {
    pub triple: Triple,
    pub chapter: u32,
}

impl Quadruple {
    pub fn new(triple: Triple, chapter: u32) -> Self {
        Self { triple, chapter }
    }
}

impl fmt::Display for Quadruple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<{}, {}, {}, {}>",
            self.triple.subject, self.triple.action, self.triple.object, self.chapter
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractedTriples {
    pub triples: Vec<Triple>,
    pub warnings: Vec<String>,
}

fn numbered_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d+)\s*[.)]\s*(.*)$").unwrap())
}

/// Parses a numbered triple list such as `1.(Lily, lives in, quaint rural town)`.
///
/// Numbered lines or parenthesised lines that do not yield exactly three
/// valid elements are skipped and reported as warnings; any other line
/// (preambles, blank lines) is ignored.
pub fn parse_triples(completion: &str) -> ExtractedTriples {
    let mut out = ExtractedTriples::default();
    for (lineno, raw) in completion.lines().enumerate() {
        let line = raw.trim();
        let body = match numbered_re().captures(line) {
            Some(c) => c.get(2).unwrap().as_str().trim(),
            None if line.starts_with('(') => line,
            None => continue,
        };
        let warn = |msg: String| format!("line {}: {msg}: {line:?}", lineno + 1);
        let Some(open) = body.find('(') else {
            out.warnings.push(warn("no opening parenthesis".into()));
            continue;
        };
        let Some(close) = body.rfind(')').filter(|&c| c > open) else {
            out.warnings.push(warn("no closing parenthesis".into()));
            continue;
        };
        let parts: Vec<&str> = body[open + 1..close]
            .split(',')
            .map(|p| p.trim().trim_matches(|c| c == '"' || c == '\'').trim())
            .collect();
        if parts.len() != 3 {
            out.warnings
                .push(warn(format!("expected 3 elements, found {}", parts.len())));
            continue;
        }
        match Triple::new(parts[0], parts[1], parts[2]) {
            Ok(t) => out.triples.push(t),
            Err(e) => out.warnings.push(warn(e.to_string())),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const LILY: &str = "1.(Lily, lives in, quaint rural town)
2. (quaint rural town, characterized by, lush greenery)
3. (quaint rural town, characterized by, rolling hills)
4. (Lily, feels, restlessness)
5. (Lily, yearns for, adventure)
6. (dense jungle, located beyond, quaint rural town)
7. (Lily, discovers, ancient diary)
8. (ancient diary, found in, grandmother's attic)
9. (ancient diary, characterized by, yellowed pages)
10. (ancient diary, characterized by, faded ink)";

    #[test]
    fn lily_example() {
        let parsed = parse_triples(LILY);
        assert_eq!(parsed.triples.len(), 10);
        assert!(parsed.warnings.is_empty());
        assert_eq!(
            parsed.triples[0],
            Triple::new("Lily", "lives in", "quaint rural town").unwrap()
        );
        assert_eq!(parsed.triples[7].object, "grandmother's attic");
    }

    #[test]
    fn two_line_list() {
        let parsed = parse_triples("1.(A, loves, B)\n2.(B, fears, A)");
        assert_eq!(parsed.triples.len(), 2);
        assert_eq!(parsed.triples[1].action, "fears");
    }

    #[test]
    fn malformed_line_is_skipped_with_warning() {
        let text = "Your result:\n1.(A, b, C)\n2.(D, e, F)\n3.(X, broken\n4.(G, h, I)\n5.(J, k, L)\n6.(M, n, O)";
        let parsed = parse_triples(text);
        // hand count: lines 1,2,4,5,6 are well formed
        assert_eq!(parsed.triples.len(), 5);
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains("broken"));
    }

    #[test]
    fn wrong_arity_and_pronouns_rejected() {
        let text = "1.(A, b)\n2.(A, b, c, d)\n3.(they, plan, to keep love alive)\n4.(obstacles, they, will face)\n5.(\"Bob\", \"hit\", \"Jane\")";
        let parsed = parse_triples(text);
        assert_eq!(parsed.triples, vec![Triple::new("Bob", "hit", "Jane").unwrap()]);
        assert_eq!(parsed.warnings.len(), 4);
    }

    #[test]
    fn triple_invariants() {
        assert_eq!(Triple::new(" ", "a", "b"), Err(TripleError::EmptyField("subject")));
        assert!(matches!(Triple::new("Bob", "hit", "It"), Err(TripleError::Pronoun("object", _))));
        assert!(Triple::new("Bob", "hit", "Itzel").is_ok());
        assert!(Triple::new("someone", "hit", "Bob").unwrap().has_placeholder());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_entity("  Karen   Spooner "), "karen spooner");
        let t = Triple::new("Bob ", " HIT", "jane").unwrap();
        assert_eq!(t.key(), ("bob".into(), "hit".into(), "jane".into()));
        assert_eq!(t.sentence(), "Bob HIT jane");
    }
}
