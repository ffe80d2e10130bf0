//! In-memory triple store with subject and predicate indexes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ToolError;

/// Matches any value in a [`TriplePattern`] position.
pub const WILDCARD: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: impl Into<String>, predicate: impl Into<String>, object: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePattern {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl TriplePattern {
    pub fn new(subject: impl Into<String>, predicate: impl Into<String>, object: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }

    pub fn any() -> Self {
        Self::new(WILDCARD, WILDCARD, WILDCARD)
    }

    fn field(value: &str) -> Option<&str> {
        (value != WILDCARD).then_some(value)
    }

    pub fn matches(&self, t: &Triple) -> bool {
        Self::field(&self.subject).is_none_or(|s| s == t.subject)
            && Self::field(&self.predicate).is_none_or(|p| p == t.predicate)
            && Self::field(&self.object).is_none_or(|o| o == t.object)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    triples: BTreeSet<Triple>,
    by_subject: BTreeMap<String, BTreeSet<Triple>>,
    by_predicate: BTreeMap<String, BTreeSet<Triple>>,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Adds a triple; returns false when it was already present.
    pub fn add(&mut self, triple: Triple) -> Result<bool, ToolError> {
        for (name, value) in [
            ("subject", &triple.subject),
            ("predicate", &triple.predicate),
            ("object", &triple.object),
        ] {
            if value.trim().is_empty() {
                return Err(ToolError::EmptyField(name));
            }
        }
        if !self.triples.insert(triple.clone()) {
            return Ok(false);
        }
        self.by_subject
            .entry(triple.subject.clone())
            .or_default()
            .insert(triple.clone());
        self.by_predicate
            .entry(triple.predicate.clone())
            .or_default()
            .insert(triple);
        Ok(true)
    }

    /// All matches, sorted by (subject, predicate, object).
    pub fn query(&self, pattern: &TriplePattern) -> Vec<Triple> {
        let candidates: Box<dyn Iterator<Item = &Triple>> = if let Some(s) = TriplePattern::field(&pattern.subject) {
            match self.by_subject.get(s) {
                Some(set) => Box::new(set.iter()),
                None => return Vec::new(),
            }
        } else if let Some(p) = TriplePattern::field(&pattern.predicate) {
            match self.by_predicate.get(p) {
                Some(set) => Box::new(set.iter()),
                None => return Vec::new(),
            }
        } else {
            Box::new(self.triples.iter())
        };
        candidates.filter(|t| pattern.matches(t)).cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }
}

/// Parses JSON Lines of `{subject, predicate, object}`.
pub fn parse_triples(text: &str) -> Result<Vec<Triple>, ToolError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| {
            serde_json::from_str::<Triple>(l).map_err(|e| ToolError::InvalidLine {
                line: idx + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_store_wildcard() {
        assert!(TripleStore::new().query(&TriplePattern::any()).is_empty());
    }

    #[test]
    fn add_and_query_subject() {
        let mut kg = TripleStore::new();
        kg.add(Triple::new("a", "owns", "b")).unwrap();
        assert_eq!(
            kg.query(&TriplePattern::new("a", "*", "*")),
            vec![Triple::new("a", "owns", "b")]
        );
    }

    #[test]
    fn dedup_and_empty_field() {
        let mut kg = TripleStore::new();
        assert!(kg.add(Triple::new("a", "p", "b")).unwrap());
        assert!(!kg.add(Triple::new("a", "p", "b")).unwrap());
        assert_eq!(kg.len(), 1);
        assert!(matches!(
            kg.add(Triple::new("a", "", "b")),
            Err(ToolError::EmptyField("predicate"))
        ));
    }

    #[test]
    fn sorted_output() {
        let mut kg = TripleStore::new();
        kg.add(Triple::new("b", "p", "x")).unwrap();
        kg.add(Triple::new("a", "q", "y")).unwrap();
        kg.add(Triple::new("a", "p", "z")).unwrap();
        let all = kg.query(&TriplePattern::new("*", "*", "*"));
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
        assert_eq!(kg.query(&TriplePattern::new("*", "p", "*")).len(), 2);
        assert_eq!(kg.query(&TriplePattern::new("*", "*", "y")).len(), 1);
    }
}
