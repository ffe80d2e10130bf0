//! Per-domain exact vector stores.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::embed::{embed, Embedding};
use super::ToolError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(rename = "domain")]
    pub domain_tag: String,
    pub text: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDocument {
    pub document: Document,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub document: Document,
    pub score: f64,
}

/// Ranking order shared by every top-k in the crate: score descending, then
/// identifier ascending.
pub fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

/// Selects the `k` best items under `cmp`, returned in order.
pub(crate) fn top_k_by<T>(mut items: Vec<T>, k: usize, cmp: impl Fn(&T, &T) -> Ordering) -> Vec<T> {
    if k == 0 {
        return Vec::new();
    }
    if items.len() > k {
        items.select_nth_unstable_by(k - 1, &cmp);
        items.truncate(k);
    }
    items.sort_by(&cmp);
    items
}

/// One domain's corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainStore {
    docs: BTreeMap<String, StoredDocument>,
}

impl DomainStore {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> impl Iterator<Item = &StoredDocument> {
        self.docs.values()
    }

    pub fn get(&self, doc_id: &str) -> Option<&StoredDocument> {
        self.docs.get(doc_id)
    }

    pub fn search(&self, query: &Embedding, k: usize) -> Vec<ScoredDocument> {
        let scored: Vec<(f64, &StoredDocument)> = self.docs.values().map(|d| (query.cosine(&d.embedding), d)).collect();
        top_k_by(scored, k, |a, b| {
            rank_order(a.0, &a.1.document.doc_id, b.0, &b.1.document.doc_id)
        })
        .into_iter()
        .map(|(score, d)| ScoredDocument {
            document: d.document.clone(),
            score,
        })
        .collect()
    }
}

/// The collection of domain vector databases, one per domain tag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VectorStores {
    domains: BTreeMap<String, DomainStore>,
}

impl VectorStores {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates an empty store for `tag`. Returns false if it already existed.
    pub fn create_domain(&mut self, tag: &str) -> bool {
        if self.domains.contains_key(tag) {
            return false;
        }
        self.domains.insert(tag.to_string(), DomainStore::default());
        true
    }

    pub fn has_domain(&self, tag: &str) -> bool {
        self.domains.contains_key(tag)
    }

    pub fn domain(&self, tag: &str) -> Result<&DomainStore, ToolError> {
        self.domains
            .get(tag)
            .ok_or_else(|| ToolError::UnknownDomain(tag.to_string()))
    }

    pub fn domain_tags(&self) -> impl Iterator<Item = &str> {
        self.domains.keys().map(String::as_str)
    }

    /// Inserts or replaces by `(domain, doc_id)`, creating the domain on first
    /// use. The document's own domain tag is overwritten with `domain_tag`.
    pub fn upsert(&mut self, domain_tag: &str, mut document: Document) -> Result<Document, ToolError> {
        if document.text.trim().is_empty() {
            return Err(ToolError::EmptyContent);
        }
        if document.doc_id.is_empty() {
            return Err(ToolError::EmptyField("doc_id"));
        }
        document.domain_tag = domain_tag.to_string();
        let embedding = embed(&document.text);
        let store = self.domains.entry(domain_tag.to_string()).or_default();
        store.docs.insert(
            document.doc_id.clone(),
            StoredDocument {
                document: document.clone(),
                embedding,
            },
        );
        Ok(document)
    }

    pub fn delete(&mut self, domain_tag: &str, doc_id: &str) -> bool {
        self.domains
            .get_mut(domain_tag)
            .is_some_and(|d| d.docs.remove(doc_id).is_some())
    }

    pub fn search(&self, domain_tag: &str, query_text: &str, k: usize) -> Result<Vec<ScoredDocument>, ToolError> {
        let store = self.domain(domain_tag)?;
        Ok(store.search(&embed(query_text), k.max(1)))
    }
}

/// Parses a JSON Lines corpus. Blank lines are skipped; line numbers are 1-based.
pub fn parse_corpus(text: &str) -> Result<Vec<Document>, ToolError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Line {
        doc_id: String,
        #[serde(default)]
        domain: Option<String>,
        text: String,
        #[serde(default)]
        metadata: BTreeMap<String, String>,
    }
    let mut docs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| ToolError::InvalidLine {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        if line.text.trim().is_empty() {
            return Err(ToolError::InvalidLine {
                line: idx + 1,
                reason: "empty text".into(),
            });
        }
        docs.push(Document {
            doc_id: line.doc_id,
            domain_tag: line.domain.unwrap_or_default(),
            text: line.text,
            metadata: line.metadata,
        });
    }
    Ok(docs)
}
