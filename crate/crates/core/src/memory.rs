//! Agent memory: session history, preferences, expert feedback, and domain
//! notes, each stored with its embedding for similarity recall.
//!
//! Records are immutable once appended. Sequence numbers are a per-session
//! logical counter starting at 1; record ids are global and sort in append
//! order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tools::embed::{embed, Embedding};
use crate::tools::vector::{rank_order, top_k_by};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryKind {
    Interaction,
    Preference,
    Feedback,
    DomainNote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub record_id: String,
    pub session_id: String,
    pub seq: u64,
    pub kind: MemoryKind,
    pub content: String,
    pub embedding: Embedding,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MemoryError {
    #[error("memory content is empty")]
    EmptyContent,
}

/// Restricts [`MemoryStore::recall_filtered`].
#[derive(Debug, Clone, Default)]
pub struct RecallFilter<'a> {
    pub session_id: Option<&'a str>,
    pub kind: Option<MemoryKind>,
}

#[derive(Debug, Clone, Default)]
pub struct MemoryStore {
    records: Vec<MemoryRecord>,
    sessions: BTreeMap<String, Vec<usize>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[MemoryRecord] {
        &self.records
    }

    pub fn append(&mut self, session_id: &str, kind: MemoryKind, content: &str) -> Result<MemoryRecord, MemoryError> {
        if content.trim().is_empty() {
            return Err(MemoryError::EmptyContent);
        }
        let idx = self.records.len();
        let session = self.sessions.entry(session_id.to_string()).or_default();
        let record = MemoryRecord {
            record_id: format!("mem-{:08}", idx + 1),
            session_id: session_id.to_string(),
            seq: session.len() as u64 + 1,
            kind,
            content: content.to_string(),
            embedding: embed(content),
        };
        session.push(idx);
        self.records.push(record.clone());
        Ok(record)
    }

    /// The last `limit` records of a session, oldest first.
    pub fn recall_session(&self, session_id: &str, limit: usize) -> Vec<MemoryRecord> {
        let Some(indices) = self.sessions.get(session_id) else {
            return Vec::new();
        };
        let start = indices.len().saturating_sub(limit);
        indices[start..].iter().map(|&i| self.records[i].clone()).collect()
    }

    /// Top-k records by cosine similarity to `query_text`, across all sessions
    /// unless one is given.
    pub fn recall_relevant(
        &self,
        query_text: &str,
        k: usize,
        session_id: Option<&str>,
    ) -> Result<Vec<(MemoryRecord, f64)>, MemoryError> {
        self.recall_filtered(query_text, k, &RecallFilter { session_id, kind: None })
    }

    pub fn recall_filtered(
        &self,
        query_text: &str,
        k: usize,
        filter: &RecallFilter<'_>,
    ) -> Result<Vec<(MemoryRecord, f64)>, MemoryError> {
        if query_text.trim().is_empty() {
            return Err(MemoryError::EmptyContent);
        }
        let query = embed(query_text);
        let scored: Vec<(f64, &MemoryRecord)> = self
            .records
            .iter()
            .filter(|r| filter.session_id.is_none_or(|s| r.session_id == s))
            .filter(|r| filter.kind.is_none_or(|k| r.kind == k))
            .map(|r| (query.cosine(&r.embedding), r))
            .collect();
        Ok(
            top_k_by(scored, k, |a, b| rank_order(a.0, &a.1.record_id, b.0, &b.1.record_id))
                .into_iter()
                .map(|(s, r)| (r.clone(), s))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_append_has_seq_one() {
        let mut m = MemoryStore::new();
        let r = m.append("s1", MemoryKind::Interaction, "hello").unwrap();
        assert_eq!(r.seq, 1);
        assert_eq!(m.recall_session("s1", 10), vec![r]);
    }

    #[test]
    fn seq_per_session() {
        let mut m = MemoryStore::new();
        m.append("s1", MemoryKind::Interaction, "a").unwrap();
        m.append("s2", MemoryKind::Interaction, "b").unwrap();
        let r = m.append("s1", MemoryKind::Preference, "c").unwrap();
        assert_eq!(r.seq, 2);
    }

    #[test]
    fn empty_content_rejected() {
        let mut m = MemoryStore::new();
        assert_eq!(
            m.append("s1", MemoryKind::Interaction, ""),
            Err(MemoryError::EmptyContent)
        );
        assert_eq!(
            m.append("s1", MemoryKind::Interaction, " \t"),
            Err(MemoryError::EmptyContent)
        );
        assert!(m.recall_relevant("", 1, None).is_err());
    }

    #[test]
    fn session_suffix() {
        let mut m = MemoryStore::new();
        for t in ["one", "two", "three"] {
            m.append("s", MemoryKind::Interaction, t).unwrap();
        }
        let seqs: Vec<u64> = m.recall_session("s", 2).iter().map(|r| r.seq).collect();
        assert_eq!(seqs, vec![2, 3]);
        assert!(m.recall_session("unknown", 5).is_empty());
    }

    #[test]
    fn identical_content_scores_one() {
        let mut m = MemoryStore::new();
        m.append("s", MemoryKind::Interaction, "shipment delayed in port")
            .unwrap();
        m.append("s", MemoryKind::Interaction, "refund processed").unwrap();
        let hits = m.recall_relevant("shipment delayed in port", 1, None).unwrap();
        assert_eq!(hits[0].0.content, "shipment delayed in port");
        assert!((hits[0].1 - 1.0).abs() < 1e-9);
        assert!(MemoryStore::new().recall_relevant("x", 3, None).unwrap().is_empty());
    }

    #[test]
    fn kind_and_session_filters() {
        let mut m = MemoryStore::new();
        m.append("a", MemoryKind::Feedback, "status=approved").unwrap();
        m.append("b", MemoryKind::Interaction, "status=approved").unwrap();
        let hits = m
            .recall_filtered(
                "status=approved",
                5,
                &RecallFilter {
                    session_id: None,
                    kind: Some(MemoryKind::Feedback),
                },
            )
            .unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(m.recall_relevant("status", 5, Some("b")).unwrap().len(), 1);
    }
}
