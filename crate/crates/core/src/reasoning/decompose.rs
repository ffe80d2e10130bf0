//! Query decomposition into ordered subtask drafts.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ReasoningError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Capability {
    VectorSearch,
    KnowledgeGraph,
    WebSearch,
}

impl Capability {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::VectorSearch => "vector-search",
            Self::KnowledgeGraph => "knowledge-graph",
            Self::WebSearch => "web-search",
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskDraft {
    pub index: usize,
    pub description: String,
    pub capability_hint: Capability,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconEntry {
    pub keyword: String,
    pub capability: Capability,
}

/// Ordered keyword table; the first keyword found in a description decides
/// its capability. Matching is a case-insensitive substring test.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CapabilityLexicon {
    entries: Vec<LexiconEntry>,
}

impl CapabilityLexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Self {
        Self { entries }
    }

    pub fn from_pairs(pairs: &[(&str, Capability)]) -> Self {
        Self::new(
            pairs
                .iter()
                .map(|(k, c)| LexiconEntry {
                    keyword: k.to_string(),
                    capability: *c,
                })
                .collect(),
        )
    }

    pub fn classify(&self, description: &str) -> Capability {
        let lowered = description.to_lowercase();
        self.entries
            .iter()
            .find(|e| lowered.contains(&e.keyword.to_lowercase()))
            .map(|e| e.capability)
            .unwrap_or(Capability::VectorSearch)
    }
}

fn is_and_at(chars: &[char], i: usize) -> bool {
    let word = ['a', 'n', 'd'];
    if i + 3 > chars.len() {
        return false;
    }
    let matches = chars[i..i + 3]
        .iter()
        .zip(word)
        .all(|(c, w)| c.to_ascii_lowercase() == w);
    let left_ok = i == 0 || !chars[i - 1].is_alphanumeric();
    let right_ok = i + 3 == chars.len() || !chars[i + 3].is_alphanumeric();
    matches && left_ok && right_ok
}

/// Splits at top-level `,` `;` and the word "and". Separators inside
/// parentheses, brackets, or double quotes do not split. Pieces are trimmed
/// and empty pieces dropped.
pub fn split_clauses(query: &str) -> Vec<String> {
    let chars: Vec<char> = query.chars().collect();
    let mut pieces = Vec::new();
    let mut current = String::new();
    let mut depth = 0usize;
    let mut quoted = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let top = depth == 0 && !quoted;
        match c {
            '"' => quoted = !quoted,
            '(' | '[' if !quoted => depth += 1,
            ')' | ']' if !quoted => depth = depth.saturating_sub(1),
            _ => {}
        }
        if top && (c == ',' || c == ';') {
            pieces.push(std::mem::take(&mut current));
            i += 1;
            continue;
        }
        if top && is_and_at(&chars, i) {
            pieces.push(std::mem::take(&mut current));
            i += 3;
            continue;
        }
        current.push(c);
        i += 1;
    }
    pieces.push(current);
    pieces
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

pub fn decompose_scripted(query: &str, lexicon: &CapabilityLexicon) -> Result<Vec<SubtaskDraft>, ReasoningError> {
    if query.trim().is_empty() {
        return Err(ReasoningError::EmptyQuery);
    }
    Ok(split_clauses(query)
        .into_iter()
        .enumerate()
        .map(|(index, description)| SubtaskDraft {
            index,
            capability_hint: lexicon.classify(&description),
            description,
        })
        .collect())
}

/// Parses a remote decomposition reply: a JSON array of strings or of
/// `{description, capability?}` objects, possibly wrapped in prose. Any
/// failure yields one subtask spanning the whole query.
pub fn parse_remote_plan(reply: &str, query: &str, lexicon: &CapabilityLexicon) -> Vec<SubtaskDraft> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Item {
        Text(String),
        Object {
            description: String,
            #[serde(default)]
            capability: Option<Capability>,
        },
    }
    let parsed = reply
        .find('[')
        .zip(reply.rfind(']'))
        .filter(|(a, b)| a < b)
        .and_then(|(a, b)| serde_json::from_str::<Vec<Item>>(&reply[a..=b]).ok())
        .map(|items| {
            items
                .into_iter()
                .filter_map(|item| {
                    let (description, capability) = match item {
                        Item::Text(t) => (t, None),
                        Item::Object {
                            description,
                            capability,
                        } => (description, capability),
                    };
                    let description = description.trim().to_string();
                    (!description.is_empty()).then(|| {
                        let hint = capability.unwrap_or_else(|| lexicon.classify(&description));
                        (description, hint)
                    })
                })
                .collect::<Vec<_>>()
        })
        .filter(|items| !items.is_empty());
    let items = parsed.unwrap_or_else(|| {
        let whole = query.trim().to_string();
        let hint = lexicon.classify(&whole);
        vec![(whole, hint)]
    });
    items
        .into_iter()
        .enumerate()
        .map(|(index, (description, capability_hint))| SubtaskDraft {
            index,
            description,
            capability_hint,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enterprise_query_three_parts() {
        let parts = split_clauses("insights on financial performance, customer feedback, and market trends");
        assert_eq!(
            parts,
            vec![
                "insights on financial performance",
                "customer feedback",
                "market trends"
            ]
        );
    }

    #[test]
    fn no_split_points() {
        let lex = CapabilityLexicon::default();
        let plan = decompose_scripted("track my shipment", &lex).unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!(plan[0].index, 0);
        assert_eq!(plan[0].capability_hint, Capability::VectorSearch);
    }

    #[test]
    fn and_is_whole_word() {
        assert_eq!(split_clauses("brand handling"), vec!["brand handling"]);
        assert_eq!(split_clauses("A AND B"), vec!["A", "B"]);
    }

    #[test]
    fn nested_separators_kept() {
        assert_eq!(
            split_clauses("costs (rent, power) and \"salt; pepper\""),
            vec!["costs (rent, power)", "\"salt; pepper\""]
        );
    }

    #[test]
    fn empty_query() {
        assert_eq!(
            decompose_scripted("  ", &CapabilityLexicon::default()),
            Err(ReasoningError::EmptyQuery)
        );
    }

    #[test]
    fn lexicon_first_match() {
        let lex = CapabilityLexicon::from_pairs(&[
            ("market", Capability::WebSearch),
            ("customer", Capability::KnowledgeGraph),
        ]);
        assert_eq!(lex.classify("customer market"), Capability::WebSearch);
        assert_eq!(lex.classify("Customer feedback"), Capability::KnowledgeGraph);
        assert_eq!(lex.classify("revenue"), Capability::VectorSearch);
    }

    #[test]
    fn remote_plan_parsing() {
        let lex = CapabilityLexicon::default();
        let plan = parse_remote_plan(
            "Sure:\n[{\"description\":\"a\",\"capability\":\"web-search\"},\"b\"]",
            "q",
            &lex,
        );
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[0].capability_hint, Capability::WebSearch);
        assert_eq!(plan[1].index, 1);
        let fallback = parse_remote_plan("no list here", " whole query ", &lex);
        assert_eq!(fallback.len(), 1);
        assert_eq!(fallback[0].description, "whole query");
        assert_eq!(parse_remote_plan("[]", "q", &lex).len(), 1);
    }
}
