//! User-facing responses and the provenance attached to them.

use serde::{Deserialize, Serialize};

use crate::reasoning::PersonaTag;
use crate::skills::RiskAssessment;
use crate::tools::{ScoredDocument, SearchResult, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Router,
    Orchestrated,
    Hitl,
    WorkflowChain,
}

impl Pattern {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Router => "router",
            Self::Orchestrated => "orchestrated",
            Self::Hitl => "hitl",
            Self::WorkflowChain => "workflow-chain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "router" => Some(Self::Router),
            "orchestrated" => Some(Self::Orchestrated),
            "hitl" => Some(Self::Hitl),
            "workflow-chain" => Some(Self::WorkflowChain),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRef {
    pub domain: String,
    pub doc_id: String,
    pub score: f64,
}

impl From<&ScoredDocument> for DocumentRef {
    fn from(d: &ScoredDocument) -> Self {
        Self {
            domain: d.document.domain_tag.clone(),
            doc_id: d.document.doc_id.clone(),
            score: d.score,
        }
    }
}

/// One step of the path that produced a response. `event_seq` points at the
/// event-log entry the step wrote, when it wrote one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailEntry {
    pub stage: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_seq: Option<u64>,
}

impl TrailEntry {
    pub fn new(stage: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            stage: stage.into(),
            detail: detail.into(),
            event_seq: None,
        }
    }

    pub fn at(mut self, seq: u64) -> Self {
        self.event_seq = Some(seq);
        self
    }
}

/// Whether the answer itself went out, or a refusal replaced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Delivered,
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub pattern: Pattern,
    pub domains_touched: Vec<String>,
    pub documents: Vec<DocumentRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triples: Vec<Triple>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub web_results: Vec<SearchResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<String>,
    /// Screening of the payload actually delivered.
    pub risk: RiskAssessment,
    /// The assessment that caused a withheld answer to be replaced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercepted: Option<RiskAssessment>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review_id: Option<String>,
    pub decision_trail: Vec<TrailEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalResponse {
    pub query_id: String,
    pub session_id: String,
    pub query: String,
    pub text: String,
    pub persona: PersonaTag,
    pub provenance: Provenance,
}
