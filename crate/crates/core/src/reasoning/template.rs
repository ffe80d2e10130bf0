use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::ReasoningError;

/// Built-in templates, used for any id the configured template directory
/// does not provide.
pub const DEFAULT_TEMPLATES: &[(&str, &str)] = &[
    ("rag-answer", include_str!("../../fixtures/templates/rag-answer.txt")),
    (
        "refine-query",
        include_str!("../../fixtures/templates/refine-query.txt"),
    ),
    ("synthesize", include_str!("../../fixtures/templates/synthesize.txt")),
    ("hitl-draft", include_str!("../../fixtures/templates/hitl-draft.txt")),
    (
        "agent-vector",
        include_str!("../../fixtures/templates/agent-vector.txt"),
    ),
    ("agent-kg", include_str!("../../fixtures/templates/agent-kg.txt")),
    (
        "agent-search",
        include_str!("../../fixtures/templates/agent-search.txt"),
    ),
    ("decompose", include_str!("../../fixtures/templates/decompose.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: String,
    pub body: String,
    pub required_vars: BTreeSet<String>,
}

/// A `{name}` occurrence in a template body, as a char range.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Placeholder {
    start: usize,
    end: usize,
    name: String,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Braces that do not enclose a valid name (JSON examples, `{}`) are literal.
fn placeholders(chars: &[char]) -> Vec<Placeholder> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '{' && i + 1 < chars.len() && is_name_start(chars[i + 1]) {
            let mut j = i + 1;
            while j < chars.len() && is_name_char(chars[j]) {
                j += 1;
            }
            if j < chars.len() && chars[j] == '}' {
                out.push(Placeholder {
                    start: i,
                    end: j + 1,
                    name: chars[i + 1..j].iter().collect(),
                });
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Single-pass substitution: values are inserted verbatim and never rescanned.
pub(crate) fn substitute<'a>(body: &str, lookup: impl Fn(&str) -> Option<&'a str>) -> Result<String, String> {
    let chars: Vec<char> = body.chars().collect();
    let mut out = String::with_capacity(body.len());
    let mut cursor = 0;
    for ph in placeholders(&chars) {
        out.extend(&chars[cursor..ph.start]);
        match lookup(&ph.name) {
            Some(v) => out.push_str(v),
            None => return Err(ph.name),
        }
        cursor = ph.end;
    }
    out.extend(&chars[cursor..]);
    Ok(out)
}

impl PromptTemplate {
    pub fn new(template_id: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let chars: Vec<char> = body.chars().collect();
        let required_vars = placeholders(&chars).into_iter().map(|p| p.name).collect();
        Self {
            template_id: template_id.into(),
            body,
            required_vars,
        }
    }

    pub fn render(&self, variables: &BTreeMap<&str, &str>) -> Result<String, ReasoningError> {
        substitute(&self.body, |name| variables.get(name).copied()).map_err(ReasoningError::MissingVariable)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl TemplateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_defaults() -> Self {
        let mut reg = Self::new();
        for (id, body) in DEFAULT_TEMPLATES {
            reg.register(PromptTemplate::new(*id, body.trim_end()));
        }
        reg
    }

    /// Defaults overlaid with every `*.txt` file in `dir` (id = file stem).
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut reg = Self::with_defaults();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        for path in paths {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let body = std::fs::read_to_string(&path)?;
            reg.register(PromptTemplate::new(id, body.trim_end()));
        }
        Ok(reg)
    }

    pub fn register(&mut self, template: PromptTemplate) {
        self.templates.insert(template.template_id.clone(), template);
    }

    pub fn get(&self, template_id: &str) -> Option<&PromptTemplate> {
        self.templates.get(template_id)
    }

    pub fn render(&self, template_id: &str, variables: &BTreeMap<&str, &str>) -> Result<String, ReasoningError> {
        self.get(template_id)
            .ok_or_else(|| ReasoningError::UnknownTemplate(template_id.to_string()))?
            .render(variables)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars<'a>(pairs: &[(&'a str, &'a str)]) -> BTreeMap<&'a str, &'a str> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn identity_substitution() {
        let t = PromptTemplate::new("t", "{q}");
        assert_eq!(t.render(&vars(&[("q", "hi")])).unwrap(), "hi");
    }

    #[test]
    fn two_vars_no_braces_left() {
        let t = PromptTemplate::new("t", "Answer using: {ctx}\nQ: {q}");
        let out = t.render(&vars(&[("ctx", "C"), ("q", "Q1")])).unwrap();
        assert_eq!(out, "Answer using: C\nQ: Q1");
        assert!(!out.contains('{'));
    }

    #[test]
    fn missing_variable() {
        let t = PromptTemplate::new("t", "Answer using: {ctx}\nQ: {q}");
        assert_eq!(
            t.render(&vars(&[("q", "x")])),
            Err(ReasoningError::MissingVariable("ctx".into()))
        );
    }

    #[test]
    fn required_vars_match_body() {
        let t = PromptTemplate::new("t", "{a} {b} {a} {} {not closed");
        assert_eq!(
            t.required_vars,
            ["a", "b"].into_iter().map(String::from).collect::<BTreeSet<_>>()
        );
    }

    #[test]
    fn values_not_rescanned() {
        let t = PromptTemplate::new("t", "{q}|{ctx}");
        assert_eq!(t.render(&vars(&[("q", "{ctx}"), ("ctx", "c")])).unwrap(), "{ctx}|c");
    }

    #[test]
    fn unknown_template() {
        let reg = TemplateRegistry::new();
        assert_eq!(
            reg.render("nope", &BTreeMap::new()),
            Err(ReasoningError::UnknownTemplate("nope".into()))
        );
    }

    #[test]
    fn defaults_present() {
        let reg = TemplateRegistry::with_defaults();
        for (id, _) in DEFAULT_TEMPLATES {
            assert!(reg.get(id).is_some(), "{id}");
        }
        assert!(reg.get("rag-answer").unwrap().required_vars.contains("ctx"));
    }
}
