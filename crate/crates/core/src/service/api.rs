//! Request and reply bodies of the HTTP API, and the operations behind each
//! endpoint. The HTTP layer and the in-process CLI client both call these,
//! so the two surfaces cannot drift apart.

use serde::{Deserialize, Serialize};

use super::runtime::Runtime;
use super::state::{QueryRecord, QueryStatus};
use crate::error::Error;
use crate::hitl::{HitlError, ReviewItem, ReviewStatus};
use crate::orchestrator::OrchestrationRecord;
use crate::reasoning::{PersonaTag, ReasoningError};
use crate::response::{FinalResponse, Pattern};
use crate::router::{RouterError, RoutingDecision};
use crate::skills::Verdict;
use crate::tools::{parse_triples, ToolError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub session_id: String,
    pub text: String,
    pub pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<PersonaTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReply {
    pub query_id: String,
    pub status: QueryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<FinalResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review_id: Option<String>,
}

/// A query record joined with its routing or orchestration record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryView {
    #[serde(flatten)]
    pub record: QueryRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orchestration: Option<OrchestrationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSummary {
    pub review_id: String,
    pub query_id: String,
    pub session_id: String,
    pub query_text: String,
    pub domain: String,
    pub status: ReviewStatus,
    pub risk_score: f64,
    pub verdict: Verdict,
    pub flagged: bool,
    pub created_seq: u64,
}

impl From<&ReviewItem> for ReviewSummary {
    fn from(item: &ReviewItem) -> Self {
        Self {
            review_id: item.review_id.clone(),
            query_id: item.query_id.clone(),
            session_id: item.session_id.clone(),
            query_text: item.query_text.clone(),
            domain: item.domain.clone(),
            status: item.status,
            risk_score: item.provenance.risk.score,
            verdict: item.provenance.risk.verdict,
            flagged: item.provenance.intercepted.is_some(),
            created_seq: item.created_seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReply {
    pub upserted: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub event_seq: u64,
}

/// An error as the API reports it: HTTP status, a stable error name, and a
/// human-readable message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{error} ({status}): {message}")]
pub struct ApiError {
    pub status: u16,
    pub error: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, error: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            error: error.into(),
            message: message.into(),
        }
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(400, "MalformedBody", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(404, "NotFound", message)
    }
}

fn classify(e: &Error) -> (u16, &'static str) {
    match e {
        Error::Router(r) => match r {
            RouterError::DuplicateDomain(_) => (409, "DuplicateDomain"),
            RouterError::UnknownDomain(_) => (404, "UnknownDomain"),
            RouterError::NoDomains => (422, "NoDomains"),
            RouterError::EmptyQuery => (422, "EmptyQuery"),
            RouterError::NoConfidentRoute { .. } => (422, "NoConfidentRoute"),
            RouterError::NoChainDomain => (422, "NoChainDomain"),
        },
        Error::Hitl(h) => match h {
            HitlError::UnknownReview(_) => (404, "UnknownReview"),
            HitlError::AlreadyDecided(_) => (409, "AlreadyDecided"),
            HitlError::MissingReplacement => (422, "MissingReplacement"),
            HitlError::UnexpectedReplacement => (422, "UnexpectedReplacement"),
            HitlError::StillPending(_) => (409, "StillPending"),
            HitlError::InvalidStatus(_) => (422, "InvalidStatus"),
            HitlError::UnknownDomain(_) => (404, "UnknownDomain"),
            HitlError::EmptyQuery => (422, "EmptyQuery"),
        },
        Error::Tool(t) => match t {
            ToolError::EmptyContent => (422, "EmptyContent"),
            ToolError::EmptyField(_) => (422, "EmptyField"),
            ToolError::UnknownDomain(_) => (404, "UnknownDomain"),
            ToolError::InvalidLine { .. } => (400, "InvalidLine"),
            ToolError::BackendUnavailable(_) => (502, "BackendUnavailable"),
        },
        Error::Reasoning(r) => match r {
            ReasoningError::BackendUnavailable(_) => (502, "BackendUnavailable"),
            ReasoningError::EmptyQuery => (422, "EmptyQuery"),
            ReasoningError::EmptyPrompt => (422, "EmptyPrompt"),
            ReasoningError::UnknownTemplate(_) => (500, "UnknownTemplate"),
            ReasoningError::MissingVariable(_) => (500, "MissingVariable"),
            ReasoningError::InvalidRuleTable(_) => (500, "InvalidRuleTable"),
            ReasoningError::InvalidPersona(_) => (422, "InvalidPersona"),
        },
        Error::Memory(_) => (422, "EmptyContent"),
        Error::Skill(_) => (422, "SkillError"),
        Error::UnknownQuery(_) => (404, "UnknownQuery"),
        Error::Config(_) => (500, "ConfigError"),
        Error::CorruptLog { .. } => (500, "CorruptLog"),
        Error::InvalidEvent(_) => (500, "InvalidEvent"),
        Error::Io(_) => (500, "Io"),
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, name) = classify(&e);
        Self::new(status, name, e.to_string())
    }
}

pub fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::malformed(e.to_string()))
}

impl Runtime {
    pub fn api_health(&self) -> Health {
        Health {
            status: "ok".into(),
            event_seq: self.event_seq(),
        }
    }

    pub fn api_query(&self, req: QueryRequest) -> Result<QueryReply, ApiError> {
        let pattern = Pattern::parse(&req.pattern)
            .ok_or_else(|| ApiError::new(400, "UnknownPattern", format!("unknown pattern `{}`", req.pattern)))?;
        let persona = req.persona.unwrap_or(self.settings().default_persona);
        let delivered = |r: FinalResponse| QueryReply {
            query_id: r.query_id.clone(),
            status: QueryStatus::Delivered,
            review_id: None,
            response: Some(r),
        };
        match pattern {
            Pattern::Router => Ok(delivered(self.answer_routed(&req.text, &req.session_id, persona)?)),
            Pattern::Orchestrated => Ok(delivered(self.run_orchestrated(&req.text, &req.session_id, persona)?)),
            Pattern::WorkflowChain => Ok(delivered(self.run_workflow_chain_as(
                &req.text,
                &req.session_id,
                persona,
            )?)),
            Pattern::Hitl => {
                let domain = match req.domain {
                    Some(d) => d,
                    None => {
                        let min = self.settings().min_confidence;
                        self.read(|s| s.routes.classify_intent("", &req.text, min))
                            .map_err(Error::from)?
                            .chosen_domain
                    }
                };
                let item = self.submit_for_review(&req.text, &req.session_id, &domain, persona)?;
                Ok(QueryReply {
                    query_id: item.query_id,
                    status: QueryStatus::PendingReview,
                    response: None,
                    review_id: Some(item.review_id),
                })
            }
        }
    }

    pub fn api_get_query(&self, query_id: &str) -> Result<QueryView, ApiError> {
        self.read(|s| {
            let record = s.queries.get(query_id)?.clone();
            Some(QueryView {
                record,
                routing: s.routing.get(query_id).cloned(),
                orchestration: s.orchestrations.get(query_id).cloned(),
            })
        })
        .ok_or_else(|| Error::UnknownQuery(query_id.into()).into())
    }

    pub fn api_list_reviews(&self, status: Option<&str>) -> Result<Vec<ReviewSummary>, ApiError> {
        let wanted = match status {
            None => None,
            Some(s) => Some(
                ReviewStatus::parse(s)
                    .ok_or_else(|| ApiError::new(400, "InvalidStatus", format!("unknown status `{s}`")))?,
            ),
        };
        Ok(self.read(|s| {
            s.reviews
                .items()
                .filter(|i| wanted.is_none_or(|w| i.status == w))
                .map(ReviewSummary::from)
                .collect()
        }))
    }

    pub fn api_get_review(&self, review_id: &str) -> Result<ReviewItem, ApiError> {
        Ok(self.review(review_id)?)
    }

    /// Records the decision, then delivers the item with the persona the
    /// query was submitted with.
    pub fn api_decide(&self, review_id: &str, req: DecisionRequest) -> Result<ReviewItem, ApiError> {
        let status = ReviewStatus::parse(&req.status)
            .ok_or_else(|| Error::from(HitlError::InvalidStatus(req.status.clone())))?;
        let item = self.decide(review_id, status, req.note, req.replacement_text)?;
        self.finalize(review_id, item.persona)?;
        Ok(item)
    }

    pub fn api_ingest_documents(&self, domain: &str, body: &str) -> Result<IngestReply, ApiError> {
        Ok(IngestReply {
            upserted: self.ingest_jsonl(domain, body)?,
        })
    }

    pub fn api_ingest_triples(&self, body: &str) -> Result<IngestReply, ApiError> {
        let triples = parse_triples(body).map_err(Error::from)?;
        Ok(IngestReply {
            upserted: self.add_triples(triples)?,
        })
    }
}
