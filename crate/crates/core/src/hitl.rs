//! Human-in-the-loop review: draft from domain retrieval plus prior expert
//! feedback, hold the draft for an expert decision, and deliver only what
//! the expert approved, rewrote, or a rejection notice.
//!
//! Decisions are first-writer-wins. The decision and its feedback record are
//! written in one log transaction, so there is exactly one of each per item.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::memory::{MemoryKind, MemoryRecord, RecallFilter};
use crate::reasoning::PersonaTag;
use crate::response::{DocumentRef, FinalResponse, Outcome, Pattern, Provenance, TrailEntry};
use crate::router::{interaction_note, join_context};
use crate::service::runtime::Runtime;
use crate::service::state::Event;
use crate::skills::RiskAssessment;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HitlError {
    #[error("unknown review `{0}`")]
    UnknownReview(String),
    #[error("review `{0}` has already been decided")]
    AlreadyDecided(String),
    #[error("a modified decision needs a non-empty replacement_text")]
    MissingReplacement,
    #[error("replacement_text is only accepted with status modified")]
    UnexpectedReplacement,
    #[error("review `{0}` is still pending")]
    StillPending(String),
    #[error("`{0}` is not a decision status")]
    InvalidStatus(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("query is empty")]
    EmptyQuery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewStatus {
    Pending,
    Approved,
    Rejected,
    Modified,
}

impl ReviewStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pending => "pending",
            Self::Approved => "approved",
            Self::Rejected => "rejected",
            Self::Modified => "modified",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pending" => Some(Self::Pending),
            "approved" => Some(Self::Approved),
            "rejected" => Some(Self::Rejected),
            "modified" => Some(Self::Modified),
            _ => None,
        }
    }

    pub fn is_terminal(self) -> bool {
        self != Self::Pending
    }
}

/// What the draft was grounded in, and how it screened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewEvidence {
    pub documents: Vec<DocumentRef>,
    pub risk: RiskAssessment,
    /// Set when the generated draft was withheld and a refusal draft stands in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercepted: Option<RiskAssessment>,
}

/// Payload of the review-created event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewReview {
    pub review_id: String,
    pub query_id: String,
    pub session_id: String,
    pub query_text: String,
    pub domain: String,
    pub persona: PersonaTag,
    pub draft: String,
    pub provenance: ReviewEvidence,
    pub decision_trail: Vec<TrailEntry>,
}

/// Payload of the review-decided event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub review_id: String,
    pub status: ReviewStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_text: Option<String>,
}

impl ReviewDecision {
    /// Checks the decision's own shape, independent of the item's state.
    pub fn check(&self) -> Result<(), HitlError> {
        match (self.status, self.replacement_text.as_deref()) {
            (ReviewStatus::Pending, _) => Err(HitlError::InvalidStatus("pending".into())),
            (ReviewStatus::Modified, None) => Err(HitlError::MissingReplacement),
            (ReviewStatus::Modified, Some(r)) if r.trim().is_empty() => Err(HitlError::MissingReplacement),
            (ReviewStatus::Approved | ReviewStatus::Rejected, Some(_)) => Err(HitlError::UnexpectedReplacement),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub review_id: String,
    pub query_id: String,
    pub session_id: String,
    pub query_text: String,
    pub domain: String,
    pub persona: PersonaTag,
    pub draft: String,
    pub provenance: ReviewEvidence,
    pub status: ReviewStatus,
    pub expert_note: Option<String>,
    pub replacement_text: Option<String>,
    pub created_seq: u64,
    pub decided_seq: Option<u64>,
    pub decision_trail: Vec<TrailEntry>,
}

/// Review items in creation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReviewBook {
    items: BTreeMap<String, ReviewItem>,
}

impl ReviewBook {
    /// Ids are zero-padded, so lexicographic order is creation order.
    pub fn next_id(&self) -> String {
        format!("rev-{:06}", self.items.len() + 1)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, review_id: &str) -> Option<&ReviewItem> {
        self.items.get(review_id)
    }

    pub fn items(&self) -> impl Iterator<Item = &ReviewItem> {
        self.items.values()
    }

    pub fn pending(&self) -> Vec<ReviewItem> {
        self.items
            .values()
            .filter(|i| i.status == ReviewStatus::Pending)
            .cloned()
            .collect()
    }

    pub(crate) fn create(&mut self, seq: u64, new: NewReview) -> Result<ReviewItem, String> {
        if self.items.contains_key(&new.review_id) {
            return Err(format!("review `{}` already exists", new.review_id));
        }
        let item = ReviewItem {
            review_id: new.review_id,
            query_id: new.query_id,
            session_id: new.session_id,
            query_text: new.query_text,
            domain: new.domain,
            persona: new.persona,
            draft: new.draft,
            provenance: new.provenance,
            status: ReviewStatus::Pending,
            expert_note: None,
            replacement_text: None,
            created_seq: seq,
            decided_seq: None,
            decision_trail: new.decision_trail,
        };
        self.items.insert(item.review_id.clone(), item.clone());
        Ok(item)
    }

    pub(crate) fn decide(&mut self, seq: u64, decision: &ReviewDecision) -> Result<ReviewItem, HitlError> {
        let item = self
            .items
            .get_mut(&decision.review_id)
            .ok_or_else(|| HitlError::UnknownReview(decision.review_id.clone()))?;
        if item.status.is_terminal() {
            return Err(HitlError::AlreadyDecided(item.review_id.clone()));
        }
        decision.check()?;
        item.status = decision.status;
        item.expert_note = decision.note.clone();
        item.replacement_text = decision.replacement_text.clone();
        item.decided_seq = Some(seq);
        Ok(item.clone())
    }
}

/// An expert decision as stored in memory. The content is fixed-order
/// `key=value` lines with `\`, newline and carriage return escaped, and
/// echoes the query so identical repeat queries recall it first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub review_id: String,
    pub status: ReviewStatus,
    pub query: String,
    pub note: Option<String>,
    pub replacement_text: Option<String>,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

impl FeedbackRecord {
    const KEYS: [&'static str; 5] = ["review_id", "status", "query", "note", "replacement_text"];

    pub fn from_item(item: &ReviewItem) -> Self {
        Self {
            review_id: item.review_id.clone(),
            status: item.status,
            query: item.query_text.clone(),
            note: item.expert_note.clone(),
            replacement_text: item.replacement_text.clone(),
        }
    }

    pub fn to_content(&self) -> String {
        let values = [
            self.review_id.as_str(),
            self.status.as_str(),
            self.query.as_str(),
            self.note.as_deref().unwrap_or(""),
            self.replacement_text.as_deref().unwrap_or(""),
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={}", escape(v)))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn parse(content: &str) -> Option<Self> {
        let lines: Vec<&str> = content.split('\n').collect();
        if lines.len() != Self::KEYS.len() {
            return None;
        }
        let mut values = Vec::with_capacity(lines.len());
        for (line, key) in lines.iter().zip(Self::KEYS) {
            values.push(unescape(line.strip_prefix(key)?.strip_prefix('=')?));
        }
        let optional = |s: &String| (!s.is_empty()).then(|| s.clone());
        Some(Self {
            review_id: values[0].clone(),
            status: ReviewStatus::parse(&values[1])?,
            query: values[2].clone(),
            note: optional(&values[3]),
            replacement_text: optional(&values[4]),
        })
    }

    /// One line of the feedback section of a draft prompt.
    pub fn prompt_line(&self) -> String {
        let mut line = format!("[{}] {}", self.review_id, self.status.as_str());
        if let Some(r) = &self.replacement_text {
            line.push_str(&format!(": {r}"));
        }
        if let Some(n) = &self.note {
            line.push_str(&format!(" (note: {n})"));
        }
        line
    }
}

impl Runtime {
    /// Up to `f` feedback records relevant to `query_text`. Records whose
    /// echoed query equals `query_text` come first, then by similarity.
    pub fn relevant_feedback(&self, query_text: &str, f: usize) -> Result<Vec<(MemoryRecord, FeedbackRecord)>, Error> {
        let ranked = self.read(|s| {
            let filter = RecallFilter {
                session_id: None,
                kind: Some(MemoryKind::Feedback),
            };
            s.memory.recall_filtered(query_text, s.memory.len(), &filter)
        })?;
        let mut parsed: Vec<(MemoryRecord, FeedbackRecord)> = ranked
            .into_iter()
            .filter_map(|(r, _)| FeedbackRecord::parse(&r.content).map(|fb| (r, fb)))
            .collect();
        parsed.sort_by_key(|(_, fb)| fb.query != query_text);
        parsed.truncate(f);
        Ok(parsed)
    }

    pub fn submit_for_review(
        &self,
        query_text: &str,
        session_id: &str,
        domain: &str,
        persona: PersonaTag,
    ) -> Result<ReviewItem, Error> {
        if query_text.trim().is_empty() {
            return Err(HitlError::EmptyQuery.into());
        }
        let known = self.read(|s| s.corpora.has_domain(domain) || s.routes.contains(domain));
        if !known {
            return Err(HitlError::UnknownDomain(domain.into()).into());
        }
        let query_id = self.next_query_id();
        let k = self.settings().retrieval_k;
        let docs = self.read(|s| s.corpora.search(domain, query_text, k))?;
        let mut trail = vec![TrailEntry::new(
            "retrieve",
            format!(
                "{domain}: {}",
                docs.iter()
                    .map(|d| d.document.doc_id.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        )];
        let feedback = self.relevant_feedback(query_text, self.settings().feedback_k)?;
        let feedback_text = if feedback.is_empty() {
            self.settings().none_marker.clone()
        } else {
            feedback
                .iter()
                .map(|(_, fb)| fb.prompt_line())
                .collect::<Vec<_>>()
                .join("\n")
        };
        trail.push(TrailEntry::new(
            "feedback",
            if feedback.is_empty() {
                "none".to_string()
            } else {
                feedback
                    .iter()
                    .map(|(r, _)| r.record_id.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            },
        ));
        let ctx = join_context(&docs);
        let prompt = self.reasoner().render(
            "hitl-draft",
            &[("q", query_text), ("ctx", &ctx), ("feedback", &feedback_text)],
        )?;
        trail.push(TrailEntry::new("render:hitl-draft", prompt.clone()));
        let completion = self.reasoner().complete(&prompt, persona)?;
        trail.push(TrailEntry::new(
            "complete",
            format!("{} ({:?})", completion.backend_id, completion.finish_reason),
        ));
        let guarded = self.guard(completion.text);
        trail.push(guarded.trail_entry());
        let documents = docs.iter().map(DocumentRef::from).collect();
        self.transact(|txn| {
            let new = NewReview {
                review_id: txn.state().reviews.next_id(),
                query_id: query_id.clone(),
                session_id: session_id.into(),
                query_text: query_text.into(),
                domain: domain.into(),
                persona,
                draft: guarded.payload,
                provenance: ReviewEvidence {
                    documents,
                    risk: guarded.risk,
                    intercepted: guarded.intercepted,
                },
                decision_trail: trail,
            };
            txn.emit(Event::ReviewCreated(new))?.into_review()
        })
    }

    pub fn list_pending(&self) -> Vec<ReviewItem> {
        self.read(|s| s.reviews.pending())
    }

    pub fn review(&self, review_id: &str) -> Result<ReviewItem, Error> {
        self.read(|s| s.reviews.get(review_id).cloned())
            .ok_or_else(|| HitlError::UnknownReview(review_id.into()).into())
    }

    /// Records an expert decision and its feedback memory atomically.
    pub fn decide(
        &self,
        review_id: &str,
        status: ReviewStatus,
        note: Option<String>,
        replacement_text: Option<String>,
    ) -> Result<ReviewItem, Error> {
        let decision = ReviewDecision {
            review_id: review_id.into(),
            status,
            note: note.filter(|n| !n.is_empty()),
            replacement_text,
        };
        self.transact(|txn| {
            let item = txn
                .state()
                .reviews
                .get(review_id)
                .ok_or_else(|| HitlError::UnknownReview(review_id.into()))?;
            if item.status.is_terminal() {
                return Err(HitlError::AlreadyDecided(review_id.into()).into());
            }
            decision.check()?;
            let decided = txn.emit(Event::ReviewDecided(decision))?.into_review()?;
            txn.emit(Event::MemoryAppend {
                session_id: decided.session_id.clone(),
                kind: MemoryKind::Feedback,
                content: FeedbackRecord::from_item(&decided).to_content(),
            })?;
            Ok(decided)
        })
    }

    /// Delivers a decided item. Finalizing twice returns the same response.
    pub fn finalize(&self, review_id: &str, persona: PersonaTag) -> Result<FinalResponse, Error> {
        let settings = self.settings();
        self.transact(|txn| {
            let item = txn
                .state()
                .reviews
                .get(review_id)
                .cloned()
                .ok_or_else(|| HitlError::UnknownReview(review_id.into()))?;
            if !item.status.is_terminal() {
                return Err(HitlError::StillPending(review_id.into()).into());
            }
            if let Some(done) = txn.state().queries.get(&item.query_id).and_then(|q| q.response.clone()) {
                return Ok(done);
            }
            let candidate = match item.status {
                ReviewStatus::Approved => item.draft.clone(),
                ReviewStatus::Modified => item.replacement_text.clone().unwrap_or_default(),
                _ => settings.rejection_text.clone(),
            };
            let guarded = self.guard(candidate);
            let mut trail = item.decision_trail.clone();
            trail.push(TrailEntry::new("review", format!("{} created", item.review_id)).at(item.created_seq));
            let mut decided = item.status.as_str().to_string();
            if let Some(n) = &item.expert_note {
                decided.push_str(&format!(" (note: {n})"));
            }
            trail.push(match item.decided_seq {
                Some(seq) => TrailEntry::new("decision", decided).at(seq),
                None => TrailEntry::new("decision", decided),
            });
            trail.push(TrailEntry::new("guardrail:final", guarded.trail_entry().detail));
            trail.push(TrailEntry::new("persona", persona.as_str()));
            let (intercepted, outcome) = match (guarded.intercepted, &item.provenance.intercepted) {
                (Some(a), _) => (Some(a), Outcome::Blocked),
                (None, Some(a)) if item.status == ReviewStatus::Approved => (Some(a.clone()), Outcome::Blocked),
                _ => (None, Outcome::Delivered),
            };
            let memo = txn.emit(Event::MemoryAppend {
                session_id: item.session_id.clone(),
                kind: MemoryKind::Interaction,
                content: interaction_note(&item.query_text, &guarded.payload),
            })?;
            trail.push(TrailEntry::new("memory", "interaction recorded").at(memo.seq));
            let response = FinalResponse {
                query_id: item.query_id.clone(),
                session_id: item.session_id.clone(),
                query: item.query_text.clone(),
                text: self.reasoner().apply_persona(&guarded.payload, persona),
                persona,
                provenance: Provenance {
                    pattern: Pattern::Hitl,
                    domains_touched: vec![item.domain.clone()],
                    documents: item.provenance.documents.clone(),
                    triples: Vec::new(),
                    web_results: Vec::new(),
                    agents: Vec::new(),
                    risk: guarded.risk,
                    intercepted,
                    outcome,
                    review_id: Some(item.review_id.clone()),
                    decision_trail: trail,
                },
            };
            txn.emit(Event::ResponseDelivered(response.clone()))?;
            Ok(response)
        })
    }
}
