//! Story premises and writing theories.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SETTING_HEADER: &str = "Setting";
pub const CHARACTER_HEADER: &str = "Character Introduction";
pub const STORYLINE_HEADER: &str = "Necessary Storyline";

/// Header spellings accepted for the character section. The misspelt form
/// appears in published premise files.
const CHARACTER_ALIASES: [&str; 2] = ["character introduction", "character introdution"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PremiseError {
    #[error("missing `{header}` header (expected after line {after_line})")]
    MissingHeader { header: &'static str, after_line: usize },
    #[error("line {line}: `{header}` header appears twice")]
    DuplicateHeader { header: &'static str, line: usize },
    #[error("line {line}: text before the first section header")]
    Preamble { line: usize },
    #[error("line {line}: character line must read `Name: description`")]
    BadCharacter { line: usize },
    #[error("`{0}` section is empty")]
    EmptySection(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Character {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryPremise {
    pub setting: String,
    pub characters: Vec<Character>,
    pub storyline: Vec<String>,
}

fn header_of(line: &str) -> Option<usize> {
    let norm = line
        .trim()
        .trim_matches(|c: char| c == '*' || c == '#' || c == ':' || c.is_whitespace())
        .to_lowercase();
    if norm == SETTING_HEADER.to_lowercase() {
        Some(0)
    } else if CHARACTER_ALIASES.contains(&norm.as_str()) {
        Some(1)
    } else if norm == STORYLINE_HEADER.to_lowercase() {
        Some(2)
    } else {
        None
    }
}

fn numbered_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d+)\s*[.)]\s*(.*)$").unwrap())
}

const HEADERS: [&str; 3] = [SETTING_HEADER, CHARACTER_HEADER, STORYLINE_HEADER];

/// Header line number and the numbered body lines of one section.
type Section<'a> = (usize, Vec<(usize, &'a str)>);

impl StoryPremise {
    /// Parses the three-section plain-text premise format.
    ///
    /// Storyline points are numbered lines; unnumbered lines continue the
    /// previous point.
    pub fn parse(text: &str) -> Result<Self, PremiseError> {
        let mut sections: [Option<Section<'_>>; 3] = [None, None, None];
        let mut current: Option<usize> = None;
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            last_line = lineno;
            if let Some(h) = header_of(raw) {
                if sections[h].is_some() {
                    return Err(PremiseError::DuplicateHeader { header: HEADERS[h], line: lineno });
                }
                sections[h] = Some((lineno, Vec::new()));
                current = Some(h);
                continue;
            }
            if raw.trim().is_empty() {
                continue;
            }
            match current {
                Some(h) => sections[h].as_mut().unwrap().1.push((lineno, raw.trim())),
                None => return Err(PremiseError::Preamble { line: lineno }),
            }
        }
        for (h, s) in sections.iter().enumerate() {
            if s.is_none() {
                let after_line = sections[..h]
                    .iter()
                    .flatten()
                    .map(|(_, lines)| lines.last().map_or(0, |(n, _)| *n))
                    .max()
                    .unwrap_or(last_line);
                return Err(PremiseError::MissingHeader { header: HEADERS[h], after_line });
            }
        }
        let [setting, characters, storyline] = sections.map(|s| s.unwrap().1);

        let setting = setting.iter().map(|(_, l)| *l).collect::<Vec<_>>().join(" ");
        if setting.is_empty() {
            return Err(PremiseError::EmptySection(SETTING_HEADER));
        }

        let mut chars = Vec::new();
        for (lineno, line) in characters {
            let (name, desc) = line.split_once(':').ok_or(PremiseError::BadCharacter { line: lineno })?;
            if name.trim().is_empty() || desc.trim().is_empty() {
                return Err(PremiseError::BadCharacter { line: lineno });
            }
            chars.push(Character {
                name: name.trim().to_string(),
                description: desc.trim().to_string(),
            });
        }
        if chars.is_empty() {
            return Err(PremiseError::EmptySection(CHARACTER_HEADER));
        }

        let mut points: Vec<String> = Vec::new();
        for (_, line) in storyline {
            match numbered_re().captures(line) {
                Some(c) => points.push(c[2].trim().to_string()),
                None => match points.last_mut() {
                    Some(p) => {
                        p.push(' ');
                        p.push_str(line);
                    }
                    None => points.push(line.to_string()),
                },
            }
        }
        points.retain(|p| !p.is_empty());
        if points.is_empty() {
            return Err(PremiseError::EmptySection(STORYLINE_HEADER));
        }
        Ok(Self {
            setting,
            characters: chars,
            storyline: points,
        })
    }

    /// "Name: description" per line.
    pub fn characters_text(&self) -> String {
        self.characters
            .iter()
            .map(|c| format!("{}: {}", c.name, c.description))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// "1. point" per line.
    pub fn storyline_text(&self) -> String {
        self.storyline
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{}. {p}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// The premise in its input format; this is what gets stored at chapter 0.
    pub fn to_text(&self) -> String {
        format!(
            "{SETTING_HEADER}\n{}\n\n{CHARACTER_HEADER}\n{}\n\n{STORYLINE_HEADER}\n{}\n",
            self.setting,
            self.characters_text(),
            self.storyline_text()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub label: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WritingTheory {
    pub name: String,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("a writing theory needs at least two stages, found {0}")]
pub struct TheoryError(pub usize);

impl WritingTheory {
    pub fn new(name: impl Into<String>, stages: Vec<Stage>) -> Result<Self, TheoryError> {
        if stages.len() < 2 {
            return Err(TheoryError(stages.len()));
        }
        Ok(Self { name: name.into(), stages })
    }

    /// The classic five-stage dramatic arc.
    pub fn five_stage() -> Self {
        let stages = [
            ("Exposition", "introduces the setting, the main characters and their situation"),
            ("Rising Action", "builds tension through obstacles and complications"),
            ("Climax", "the turning point where the central conflict peaks"),
            ("Falling Action", "consequences of the climax unfold and loose ends begin to close"),
            ("Denouement or Resolution", "the conflict is resolved and a new normal is reached"),
        ];
        Self {
            name: "five-stage novel writing theory".into(),
            stages: stages
                .iter()
                .map(|(l, d)| Stage { label: l.to_string(), description: d.to_string() })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.stages.iter().map(|s| s.label.as_str()).collect()
    }

    /// Rendering used in the rough-outline prompt.
    pub fn to_prompt_text(&self) -> String {
        let mut out = format!("{} with {} stages:", self.name, self.stages.len());
        for (i, s) in self.stages.iter().enumerate() {
            out.push_str(&format!("\n{}. {}: {}", i + 1, s.label, s.description));
        }
        out
    }
}

impl Default for WritingTheory {
    fn default() -> Self {
        Self::five_stage()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "Setting
The story is set in the inner city of a large metropolitan area.

Character Introdution
Gary Saunders: Gary Saunders is a teenage boy who lives in the inner city.
Shannon Doyle: Shannon Doyle is a young woman in her early twenties.

Necessary Storyline
1. Shannon's father, Mike, dies unexpectedly, leaving her determined to follow in his footsteps
   and become a successful journalist.
2. Shannon lands her first major assignment.
";

    #[test]
    fn parses_sample_with_continuations_and_alias_header() {
        let p = StoryPremise::parse(SAMPLE).unwrap();
        assert_eq!(p.setting, "The story is set in the inner city of a large metropolitan area.");
        assert_eq!(p.characters.len(), 2);
        assert_eq!(p.characters[1].name, "Shannon Doyle");
        assert_eq!(p.storyline.len(), 2);
        assert!(p.storyline[0].ends_with("footsteps and become a successful journalist."));
        assert_eq!(StoryPremise::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn missing_storyline_header_reports_line() {
        let text = "Setting\nA city.\n\nCharacter Introduction\nGary: a boy.\n";
        assert_eq!(
            StoryPremise::parse(text),
            Err(PremiseError::MissingHeader { header: STORYLINE_HEADER, after_line: 5 })
        );
    }

    #[test]
    fn other_errors() {
        assert_eq!(StoryPremise::parse("hello\nSetting\nx"), Err(PremiseError::Preamble { line: 1 }));
        let bad_char = "Setting\nA city.\nCharacter Introduction\nGary is a boy\nNecessary Storyline\n1. x";
        assert_eq!(StoryPremise::parse(bad_char), Err(PremiseError::BadCharacter { line: 4 }));
        let empty = "Setting\nCharacter Introduction\nGary: boy\nNecessary Storyline\n1. x";
        assert_eq!(StoryPremise::parse(empty), Err(PremiseError::EmptySection(SETTING_HEADER)));
    }

    #[test]
    fn default_theory_has_five_stages() {
        let t = WritingTheory::default();
        assert_eq!(
            t.labels(),
            ["Exposition", "Rising Action", "Climax", "Falling Action", "Denouement or Resolution"]
        );
        assert!(WritingTheory::new("tiny", vec![t.stages[0].clone()]).is_err());
    }
}
