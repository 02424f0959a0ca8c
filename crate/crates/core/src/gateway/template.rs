//! Prompt templates with named `{placeholder}` slots.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Name → value map used to fill a template. Ordered so that digests are
/// independent of insertion order.
pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("missing binding for placeholder `{0}`")]
    MissingBinding(String),
    #[error("template body references undeclared placeholder `{0}`")]
    UnknownPlaceholder(String),
    #[error("duplicate template id `{0}`")]
    DuplicateId(String),
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Names may contain inner spaces ("volume outline") but never newlines,
    // quotes or colons, so literal JSON braces in prompt bodies are left alone.
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*(?: [A-Za-z0-9_]+)*)\}").unwrap())
}

/// Every placeholder name appearing in `body`, in first-appearance order.
pub fn placeholders(body: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    placeholder_re()
        .captures_iter(body)
        .filter_map(|c| {
            let name = c[1].to_string();
            seen.insert(name.clone()).then_some(name)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: String,
    pub body: String,
    pub required_bindings: BTreeSet<String>,
}

impl PromptTemplate {
    /// Builds a template whose required bindings are exactly the placeholders
    /// found in `body`.
    pub fn new(template_id: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let required_bindings = placeholders(&body).into_iter().collect();
        Self {
            template_id: template_id.into(),
            body,
            required_bindings,
        }
    }

    /// Builds a template with an explicit binding list. `render` rejects
    /// bodies that use names outside this list.
    pub fn with_required<I, S>(template_id: impl Into<String>, body: impl Into<String>, required: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            template_id: template_id.into(),
            body: body.into(),
            required_bindings: required.into_iter().map(Into::into).collect(),
        }
    }

    pub fn render(&self, bindings: &Bindings) -> Result<String, TemplateError> {
        render_template(self, bindings)
    }
}

/// Substitutes every placeholder in a single pass. Binding values are
/// inserted verbatim and never re-scanned.
pub fn render_template(template: &PromptTemplate, bindings: &Bindings) -> Result<String, TemplateError> {
    for name in placeholders(&template.body) {
        if !template.required_bindings.contains(&name) {
            return Err(TemplateError::UnknownPlaceholder(name));
        }
    }
    for name in &template.required_bindings {
        if !bindings.contains_key(name) {
            return Err(TemplateError::MissingBinding(name.clone()));
        }
    }
    let re = placeholder_re();
    let mut out = String::with_capacity(template.body.len());
    let mut last = 0;
    for cap in re.captures_iter(&template.body) {
        let whole = cap.get(0).unwrap();
        out.push_str(&template.body[last..whole.start()]);
        out.push_str(&bindings[&cap[1]]);
        last = whole.end();
    }
    out.push_str(&template.body[last..]);
    Ok(out)
}

/// Stable digest of the sorted (name, value) pairs.
pub fn binding_digest(bindings: &Bindings) -> String {
    let mut hasher = Sha256::new();
    for (name, value) in bindings {
        hasher.update(name.as_bytes());
        hasher.update([0x1f]);
        hasher.update(value.as_bytes());
        hasher.update([0x1e]);
    }
    hex_prefix(&hasher.finalize(), 16)
}

/// Digest of a single text, used for embedding requests.
pub fn text_digest(text: &str) -> String {
    hex_prefix(&Sha256::digest(text.as_bytes()), 16)
}

fn hex_prefix(bytes: &[u8], n: usize) -> String {
    bytes[..n].iter().map(|b| format!("{b:02x}")).collect()
}

/// Convenience constructor for a binding map.
pub fn bindings<const N: usize>(pairs: [(&str, &str); N]) -> Bindings {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn direct_substitution() {
        let t = PromptTemplate::new("score", "Score {a} vs {b}");
        assert_eq!(t.render(&bindings([("a", "x"), ("b", "y")])).unwrap(), "Score x vs y");
    }

    #[test]
    fn no_placeholders() {
        let t = PromptTemplate::new("hi", "Hi");
        assert!(t.required_bindings.is_empty());
        assert_eq!(t.render(&Bindings::new()).unwrap(), "Hi");
    }

    #[test]
    fn missing_binding() {
        let t = PromptTemplate::new("t", "Hello {name}");
        assert_eq!(
            t.render(&Bindings::new()),
            Err(TemplateError::MissingBinding("name".into()))
        );
    }

    #[test]
    fn unknown_placeholder() {
        let t = PromptTemplate::with_required("t", "Hello {name} {other}", ["name"]);
        assert_eq!(
            t.render(&bindings([("name", "a")])),
            Err(TemplateError::UnknownPlaceholder("other".into()))
        );
    }

    #[test]
    fn spaced_names_and_json_braces() {
        let body = "outline: {volume outline}\n{\n  \"result\": string\n}\nlast: {last chapter}";
        let t = PromptTemplate::new("d", body);
        assert_eq!(
            t.required_bindings,
            ["last chapter", "volume outline"].into_iter().map(String::from).collect()
        );
        let out = t
            .render(&bindings([("volume outline", "V"), ("last chapter", "L")]))
            .unwrap();
        assert!(out.starts_with("outline: V\n{\n  \"result\""));
        assert!(out.ends_with("last: L"));
    }

    #[test]
    fn values_are_not_rescanned() {
        let t = PromptTemplate::new("t", "{a}");
        assert_eq!(t.render(&bindings([("a", "{b}")])).unwrap(), "{b}");
    }

    #[test]
    fn digest_ignores_insertion_order() {
        let mut a = Bindings::new();
        a.insert("x".into(), "1".into());
        a.insert("y".into(), "2".into());
        let mut b = Bindings::new();
        b.insert("y".into(), "2".into());
        b.insert("x".into(), "1".into());
        assert_eq!(binding_digest(&a), binding_digest(&b));
        assert_ne!(binding_digest(&a), binding_digest(&bindings([("x", "12")])));
        // name/value boundary is part of the digest
        assert_ne!(
            binding_digest(&bindings([("ab", "c")])),
            binding_digest(&bindings([("a", "bc")]))
        );
    }

    proptest! {
        #[test]
        fn render_is_idempotent_once_resolved(words in proptest::collection::vec("[a-z]{1,6}", 1..6)) {
            let body = words.iter().enumerate()
                .map(|(i, w)| format!("{w} {{p{i}}}"))
                .collect::<Vec<_>>().join(" ");
            let t = PromptTemplate::new("p", body);
            let b: Bindings = (0..words.len()).map(|i| (format!("p{i}"), format!("v{i}"))).collect();
            let once = t.render(&b).unwrap();
            prop_assert!(placeholders(&once).is_empty());
            let again = PromptTemplate::new("p2", once.clone()).render(&Bindings::new()).unwrap();
            prop_assert_eq!(once, again);
        }
    }
}
