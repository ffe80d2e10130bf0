//! System state as a fold over events. The live runtime and replay share
//! [`State::apply`], so a replayed log rebuilds exactly the live state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::events::{canonical_json, sha256_hex};
use crate::error::Error;
use crate::hitl::{NewReview, ReviewBook, ReviewDecision, ReviewItem};
use crate::memory::{MemoryKind, MemoryRecord, MemoryStore};
use crate::orchestrator::OrchestrationRecord;
use crate::reasoning::PersonaTag;
use crate::response::{FinalResponse, Pattern};
use crate::router::{RouteTable, RoutingDecision};
use crate::tools::{Document, Triple, TripleStore, VectorStores};

/// Summary of the configuration a process started with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub domains: Vec<String>,
    pub seed: u64,
    pub deterministic: bool,
    pub backend: String,
    pub retrieval_k: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum Event {
    ConfigLoaded(ConfigSummary),
    MemoryAppend {
        session_id: String,
        kind: MemoryKind,
        content: String,
    },
    DocUpsert {
        domain: String,
        document: Document,
    },
    DocDelete {
        domain: String,
        doc_id: String,
    },
    KgAdd(Triple),
    RoutingDecision(RoutingDecision),
    Orchestration(OrchestrationRecord),
    ReviewCreated(NewReview),
    ReviewDecided(ReviewDecision),
    ResponseDelivered(FinalResponse),
}

/// What applying an event produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    None,
    Memory(MemoryRecord),
    Document(Document),
    Deleted(bool),
    TripleAdded(bool),
    Review(Box<ReviewItem>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryStatus {
    Delivered,
    PendingReview,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub session_id: String,
    pub query_text: String,
    pub pattern: Pattern,
    pub persona: PersonaTag,
    pub status: QueryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<FinalResponse>,
}

#[derive(Debug, Clone, Default)]
pub struct State {
    pub memory: MemoryStore,
    pub corpora: VectorStores,
    pub kg: TripleStore,
    pub routes: RouteTable,
    pub reviews: ReviewBook,
    pub queries: BTreeMap<String, QueryRecord>,
    pub routing: BTreeMap<String, RoutingDecision>,
    pub orchestrations: BTreeMap<String, OrchestrationRecord>,
}

fn invalid(reason: impl Into<String>) -> Error {
    Error::InvalidEvent(reason.into())
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure_route(&mut self, domain: &str) {
        if !self.routes.refresh(domain, &self.corpora) {
            self.routes
                .register_domain(domain, &self.corpora)
                .expect("domain store exists and is unrouted");
        }
    }

    /// Folds one event into the state. `seq` is the event's sequence number.
    pub fn apply(&mut self, seq: u64, event: &Event) -> Result<Effect, Error> {
        Ok(match event {
            Event::ConfigLoaded(summary) => {
                for domain in &summary.domains {
                    self.corpora.create_domain(domain);
                    if !self.routes.contains(domain) {
                        self.ensure_route(domain);
                    }
                }
                Effect::None
            }
            Event::MemoryAppend {
                session_id,
                kind,
                content,
            } => Effect::Memory(self.memory.append(session_id, *kind, content)?),
            Event::DocUpsert { domain, document } => {
                let stored = self.corpora.upsert(domain, document.clone())?;
                self.ensure_route(domain);
                Effect::Document(stored)
            }
            Event::DocDelete { domain, doc_id } => {
                let removed = self.corpora.delete(domain, doc_id);
                self.routes.refresh(domain, &self.corpora);
                Effect::Deleted(removed)
            }
            Event::KgAdd(triple) => Effect::TripleAdded(self.kg.add(triple.clone())?),
            Event::RoutingDecision(d) => {
                self.routing.insert(d.query_id.clone(), d.clone());
                Effect::None
            }
            Event::Orchestration(r) => {
                self.orchestrations.insert(r.query_id.clone(), r.clone());
                Effect::None
            }
            Event::ReviewCreated(new) => {
                if self.queries.contains_key(&new.query_id) {
                    return Err(invalid(format!("query `{}` already recorded", new.query_id)));
                }
                let item = self.reviews.create(seq, new.clone()).map_err(invalid)?;
                self.queries.insert(
                    item.query_id.clone(),
                    QueryRecord {
                        query_id: item.query_id.clone(),
                        session_id: item.session_id.clone(),
                        query_text: item.query_text.clone(),
                        pattern: Pattern::Hitl,
                        persona: item.persona,
                        status: QueryStatus::PendingReview,
                        review_id: Some(item.review_id.clone()),
                        response: None,
                    },
                );
                Effect::Review(Box::new(item))
            }
            Event::ReviewDecided(decision) => Effect::Review(Box::new(self.reviews.decide(seq, decision)?)),
            Event::ResponseDelivered(response) => {
                let record = self
                    .queries
                    .entry(response.query_id.clone())
                    .or_insert_with(|| QueryRecord {
                        query_id: response.query_id.clone(),
                        session_id: response.session_id.clone(),
                        query_text: response.query.clone(),
                        pattern: response.provenance.pattern,
                        persona: response.persona,
                        status: QueryStatus::Delivered,
                        review_id: response.provenance.review_id.clone(),
                        response: None,
                    });
                if record.response.is_some() {
                    return Err(invalid(format!("query `{}` delivered twice", response.query_id)));
                }
                if let Some(review_id) = &record.review_id {
                    let decided = self.reviews.get(review_id).is_some_and(|r| r.status.is_terminal());
                    if !decided {
                        return Err(invalid(format!("review `{review_id}` delivered while pending")));
                    }
                }
                record.status = QueryStatus::Delivered;
                record.persona = response.persona;
                record.response = Some(response.clone());
                Effect::None
            }
        })
    }

    /// Largest numeric suffix among recorded query ids.
    pub fn max_query_number(&self) -> u64 {
        self.queries
            .keys()
            .chain(self.routing.keys())
            .chain(self.orchestrations.keys())
            .filter_map(|id| id.strip_prefix("q-").and_then(|n| n.parse().ok()))
            .max()
            .unwrap_or(0)
    }

    /// Each store's canonical serialization, in a fixed order.
    pub fn snapshot(&self) -> Vec<(&'static str, Value)> {
        vec![
            ("memory", json!(self.memory.records())),
            ("corpora", json!(self.corpora)),
            ("kg", json!(self.kg.iter().collect::<Vec<_>>())),
            ("routes", json!(self.routes)),
            ("reviews", json!(self.reviews)),
            ("queries", json!(self.queries)),
            ("routing", json!(self.routing)),
            ("orchestrations", json!(self.orchestrations)),
        ]
    }

    /// SHA-256 over the per-store digests, in snapshot order.
    pub fn digest(&self) -> String {
        let mut combined = String::new();
        for (name, value) in self.snapshot() {
            combined.push_str(name);
            combined.push('=');
            combined.push_str(&sha256_hex(canonical_json(&value).as_bytes()));
            combined.push('\n');
        }
        sha256_hex(combined.as_bytes())
    }
}
