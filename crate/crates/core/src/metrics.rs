//! Automatic story metrics: word count, n-gram entropy and conflict rate.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::analyzer::{analyze, AnalyzerError, AnalyzerOptions, Judge};
use crate::memory::TemporalKg;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyBase {
    #[default]
    #[serde(rename = "e")]
    E,
    #[serde(rename = "2")]
    Two,
}

impl EntropyBase {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "e" | "E" | "ln" => Some(Self::E),
            "2" | "bits" => Some(Self::Two),
            _ => None,
        }
    }

    fn log(self, x: f64) -> f64 {
        match self {
            Self::E => x.ln(),
            Self::Two => x.log2(),
        }
    }
}

/// Lowercases, turns every non-alphanumeric character into whitespace and
/// splits.
pub fn tokenize(text: &str) -> Vec<String> {
    let mapped: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    mapped.to_lowercase().split_whitespace().map(str::to_string).collect()
}

/// Number of maximal non-whitespace runs.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn count_ngrams<'a>(tokens: &'a [String], n: usize, counts: &mut HashMap<&'a [String], u64>) {
    if n == 0 || tokens.len() < n {
        return;
    }
    for w in tokens.windows(n) {
        *counts.entry(w).or_default() += 1;
    }
}

fn entropy_of(counts: &HashMap<&[String], u64>, base: EntropyBase) -> f64 {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let mut values: Vec<u64> = counts.values().copied().collect();
    // fixed summation order keeps results bit-stable across runs
    values.sort_unstable();
    let h: f64 = values
        .iter()
        .map(|&f| {
            let p = f as f64 / t;
            -p * base.log(p)
        })
        .sum();
    h.max(0.0)
}

/// Entropy of the contiguous n-gram distribution, natural log.
pub fn ent_n(tokens: &[String], n: usize) -> f64 {
    ent_n_base(tokens, n, EntropyBase::E)
}

pub fn ent_n_base(tokens: &[String], n: usize, base: EntropyBase) -> f64 {
    assert!(n >= 1, "n-gram order must be at least 1");
    let mut counts = HashMap::new();
    count_ngrams(tokens, n, &mut counts);
    entropy_of(&counts, base)
}

/// Entropy over several token segments whose n-grams are pooled but never
/// span a segment boundary.
pub fn ent_n_segments(segments: &[Vec<String>], n: usize, base: EntropyBase) -> f64 {
    assert!(n >= 1, "n-gram order must be at least 1");
    let mut counts = HashMap::new();
    for s in segments {
        count_ngrams(s, n, &mut counts);
    }
    entropy_of(&counts, base)
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*#+\s*chapter\s+\d+\s*$").unwrap())
}

/// Splits a story document on `# Chapter N` header lines, dropping the
/// headers. Text without headers is one chapter.
pub fn split_chapters(story: &str) -> Vec<String> {
    let mut chapters = vec![String::new()];
    for line in story.lines() {
        if header_re().is_match(line) {
            chapters.push(String::new());
        } else {
            let cur = chapters.last_mut().unwrap();
            cur.push_str(line);
            cur.push('\n');
        }
    }
    chapters.retain(|c| !c.trim().is_empty());
    chapters
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MetricOptions {
    pub base: EntropyBase,
    /// Let bigrams run across chapter boundaries.
    pub cross_chapters: bool,
}

fn opt_two_decimals<S: serde::Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => RawValue::from_string(format!("{v:.2}"))
            .map_err(serde::ser::Error::custom)?
            .serialize(s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub word_num: usize,
    pub ent2: f64,
    pub ent_base: EntropyBase,
    #[serde(serialize_with = "opt_two_decimals")]
    pub cr_percent: Option<f64>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `key: value` lines for standard output.
    pub fn lines(&self) -> Vec<String> {
        let base = match self.ent_base {
            EntropyBase::E => "e",
            EntropyBase::Two => "2",
        };
        vec![
            format!("word_num: {}", self.word_num),
            format!("ent2: {:.4}", self.ent2),
            format!("ent_base: {base}"),
            match self.cr_percent {
                Some(cr) => format!("cr_percent: {cr:.2}"),
                None => "cr_percent: n/a".to_string(),
            },
        ]
    }
}

/// Word count and Ent-2 of a story document, plus the conflict rate when a
/// knowledge graph and judge are supplied.
pub fn evaluate_story(
    story: &str,
    options: MetricOptions,
    conflict: Option<(&TemporalKg, Judge<'_>, &AnalyzerOptions)>,
) -> Result<MetricReport, AnalyzerError> {
    let chapters = split_chapters(story);
    let word_num = chapters.iter().map(|c| word_count(c)).sum();
    let segments: Vec<Vec<String>> = if options.cross_chapters {
        vec![chapters.iter().flat_map(|c| tokenize(c)).collect()]
    } else {
        chapters.iter().map(|c| tokenize(c)).collect()
    };
    let ent2 = ent_n_segments(&segments, 2, options.base);
    let cr_percent = match conflict {
        Some((kg, judge, opts)) => Some(analyze(kg, judge, opts)?.cr_percent),
        None => None,
    };
    Ok(MetricReport {
        word_num,
        ent2,
        ent_base: options.base,
        cr_percent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_string).collect()
    }

    /// Count with a sorted map keyed by joined strings and sum in log2,
    /// converting at the end.
    fn oracle(tokens: &[String], n: usize) -> f64 {
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        let mut total = 0.0;
        let mut i = 0;
        while i + n <= tokens.len() {
            let key = tokens[i..i + n].join("\u{0}");
            *counts.entry(key).or_insert(0.0) += 1.0;
            total += 1.0;
            i += 1;
        }
        if total == 0.0 {
            return 0.0;
        }
        let bits: f64 = counts.values().map(|c| (c / total) * (total / c).log2()).sum();
        bits * std::f64::consts::LN_2
    }

    #[test]
    fn closed_forms() {
        assert_eq!(ent_n(&toks("a a a a"), 2), 0.0);
        assert!((ent_n(&toks("a b a c"), 2) - 3f64.ln()).abs() < 1e-12);
        assert!((ent_n_base(&toks("a b a c"), 2, EntropyBase::Two) - 3f64.log2()).abs() < 1e-12);
        assert_eq!(ent_n(&[], 2), 0.0);
        assert_eq!(ent_n(&toks("a"), 2), 0.0);
    }

    #[test]
    fn tokenizer_and_counts() {
        assert_eq!(tokenize("Hello, world!"), ["hello", "world"]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("Shannon's father, Mike, dies -- unexpectedly."),
            ["shannon", "s", "father", "mike", "dies", "unexpectedly"]
        );
        assert_eq!(word_count("one two  three"), 3);
        assert_eq!(word_count(""), 0);
    }

    #[test]
    fn chapters_split_and_bigrams_stay_inside() {
        let story = "# Chapter 1\n\nx y\n\n# Chapter 2\n\nz w\n";
        assert_eq!(split_chapters(story), ["\nx y\n\n", "\nz w\n"]);
        let r = evaluate_story(story, MetricOptions::default(), None).unwrap();
        assert_eq!(r.word_num, 4);
        assert!((r.ent2 - 2f64.ln()).abs() < 1e-12);
        let crossed = evaluate_story(story, MetricOptions { cross_chapters: true, ..Default::default() }, None).unwrap();
        assert!((crossed.ent2 - 3f64.ln()).abs() < 1e-12);
        assert_eq!(r.cr_percent, None);
        assert!(r.to_json().contains("\"cr_percent\": null"));
        assert!(r.to_json().contains("\"ent_base\": \"e\""));
    }

    proptest! {
        #[test]
        fn matches_oracle(seq in proptest::collection::vec(0u8..20, 0..300), n in 1usize..4) {
            let tokens: Vec<String> = seq.iter().map(|t| format!("t{t}")).collect();
            prop_assert!((ent_n(&tokens, n) - oracle(&tokens, n)).abs() < 1e-9);
        }

        #[test]
        fn bounded_by_log_support(seq in proptest::collection::vec(0u8..6, 2..200)) {
            let tokens: Vec<String> = seq.iter().map(|t| t.to_string()).collect();
            let distinct: std::collections::BTreeSet<_> = tokens.windows(2).collect();
            let h = ent_n(&tokens, 2);
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (distinct.len() as f64).ln() + 1e-12);
            prop_assert_eq!(h == 0.0, distinct.len() <= 1);
        }

        #[test]
        fn depends_only_on_ngram_multiset(seq in proptest::collection::vec(0u8..6, 2..100)) {
            let tokens: Vec<String> = seq.iter().map(|t| t.to_string()).collect();
            // reversing the bigram list as separate 2-token segments keeps the multiset
            let mut pairs: Vec<Vec<String>> = tokens.windows(2).map(|w| w.to_vec()).collect();
            pairs.reverse();
            let a = ent_n(&tokens, 2);
            let b = ent_n_segments(&pairs, 2, EntropyBase::E);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
