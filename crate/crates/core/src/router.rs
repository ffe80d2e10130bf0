//! The task-specific RAG router: classify a query's domain by cosine to each
//! domain centroid, retrieve from that domain only, and answer from the
//! retrieved context. Also hosts the static two-stage workflow chain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::memory::MemoryKind;
use crate::reasoning::PersonaTag;
use crate::response::{DocumentRef, FinalResponse, Outcome, Pattern, Provenance, TrailEntry};
use crate::service::runtime::{Guarded, Runtime};
use crate::service::state::Event;
use crate::tools::vector::{rank_order, DomainStore};
use crate::tools::{embed, Embedding, ScoredDocument, VectorStores, DIMENSION};

/// Separator placed between retrieved texts in a prompt context.
pub const CONTEXT_SEPARATOR: &str = "\n---\n";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RouterError {
    #[error("domain `{0}` is already registered")]
    DuplicateDomain(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("no domains are registered")]
    NoDomains,
    #[error("query is empty")]
    EmptyQuery,
    #[error("no domain reached the confidence floor {min_confidence}")]
    NoConfidentRoute {
        min_confidence: f64,
        alternatives: Vec<DomainScore>,
    },
    #[error("no domain is configured for the workflow chain")]
    NoChainDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainScore {
    pub domain: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub query_id: String,
    pub chosen_domain: String,
    pub confidence: f64,
    pub alternatives: Vec<DomainScore>,
}

/// Normalized mean of a domain's document embeddings. Empty domains have a
/// zero centroid.
pub fn centroid(store: &DomainStore) -> Embedding {
    let mut docs = store.documents();
    match (docs.next(), store.len()) {
        (None, _) => Embedding::zero(),
        (Some(only), 1) => only.embedding.clone(),
        (Some(first), n) => {
            let mut sum = first.embedding.values().to_vec();
            for d in docs {
                for (s, v) in sum.iter_mut().zip(d.embedding.values()) {
                    *s += v;
                }
            }
            debug_assert_eq!(sum.len(), DIMENSION);
            sum.iter_mut().for_each(|s| *s /= n as f64);
            Embedding::from_weights(sum)
        }
    }
}

/// Domain tag to centroid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RouteTable {
    centroids: BTreeMap<String, Embedding>,
}

impl RouteTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.centroids.contains_key(tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.centroids.keys().map(String::as_str)
    }

    pub fn centroid(&self, tag: &str) -> Option<&Embedding> {
        self.centroids.get(tag)
    }

    pub fn register_domain(&mut self, tag: &str, stores: &VectorStores) -> Result<&Embedding, RouterError> {
        if self.centroids.contains_key(tag) {
            return Err(RouterError::DuplicateDomain(tag.into()));
        }
        let store = stores.domain(tag).map_err(|_| RouterError::UnknownDomain(tag.into()))?;
        Ok(self.centroids.entry(tag.into()).or_insert(centroid(store)))
    }

    /// Recomputes a registered domain's centroid after its corpus changed.
    pub fn refresh(&mut self, tag: &str, stores: &VectorStores) -> bool {
        match (self.centroids.get_mut(tag), stores.domain(tag)) {
            (Some(c), Ok(store)) => {
                *c = centroid(store);
                true
            }
            _ => false,
        }
    }

    /// Every domain scored against `query_text`, best first, ties by tag.
    pub fn score_domains(&self, query_text: &str) -> Vec<DomainScore> {
        let q = embed(query_text);
        let mut scores: Vec<DomainScore> = self
            .centroids
            .iter()
            .map(|(tag, c)| DomainScore {
                domain: tag.clone(),
                score: q.cosine(c),
            })
            .collect();
        scores.sort_by(|a, b| rank_order(a.score, &a.domain, b.score, &b.domain));
        scores
    }

    pub fn classify_intent(
        &self,
        query_id: &str,
        query_text: &str,
        min_confidence: f64,
    ) -> Result<RoutingDecision, RouterError> {
        if self.centroids.is_empty() {
            return Err(RouterError::NoDomains);
        }
        if query_text.trim().is_empty() {
            return Err(RouterError::EmptyQuery);
        }
        let alternatives = self.score_domains(query_text);
        let best = &alternatives[0];
        if best.score < min_confidence {
            return Err(RouterError::NoConfidentRoute {
                min_confidence,
                alternatives,
            });
        }
        Ok(RoutingDecision {
            query_id: query_id.into(),
            chosen_domain: best.domain.clone(),
            confidence: best.score,
            alternatives,
        })
    }
}

pub(crate) fn join_context(docs: &[ScoredDocument]) -> String {
    docs.iter()
        .map(|d| d.document.text.as_str())
        .collect::<Vec<_>>()
        .join(CONTEXT_SEPARATOR)
}

fn doc_ids(docs: &[ScoredDocument]) -> String {
    if docs.is_empty() {
        return "no documents".into();
    }
    docs.iter()
        .map(|d| format!("{} ({:.4})", d.document.doc_id, d.score))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Everything a single-domain answer needs before it is committed.
struct Drafted {
    domain: String,
    docs: Vec<ScoredDocument>,
    guarded: Guarded,
    trail: Vec<TrailEntry>,
}

impl Runtime {
    pub fn classify_intent(&self, query_text: &str) -> Result<RoutingDecision, Error> {
        let query_id = self.next_query_id();
        let min = self.settings().min_confidence;
        Ok(self.read(|s| s.routes.classify_intent(&query_id, query_text, min))?)
    }

    /// Retrieve from `domain`, render `rag-answer`, complete, and screen.
    fn answer_from_domain(
        &self,
        domain: &str,
        search_text: &str,
        query_text: &str,
        persona: PersonaTag,
        mut trail: Vec<TrailEntry>,
    ) -> Result<Drafted, Error> {
        let k = self.settings().retrieval_k;
        let docs = self.read(|s| s.corpora.search(domain, search_text, k))?;
        trail.push(TrailEntry::new(
            "retrieve",
            format!("{domain} <- \"{search_text}\": {}", doc_ids(&docs)),
        ));
        let ctx = join_context(&docs);
        let prompt = self
            .reasoner()
            .render("rag-answer", &[("q", query_text), ("ctx", &ctx)])?;
        trail.push(TrailEntry::new("render:rag-answer", prompt.clone()));
        let completion = self.reasoner().complete(&prompt, persona)?;
        trail.push(TrailEntry::new(
            "complete",
            format!("{} ({:?})", completion.backend_id, completion.finish_reason),
        ));
        let guarded = self.guard(completion.text);
        trail.push(guarded.trail_entry());
        Ok(Drafted {
            domain: domain.into(),
            docs,
            guarded,
            trail,
        })
    }

    /// Classify, retrieve from the chosen domain, and answer.
    pub fn answer_routed(
        &self,
        query_text: &str,
        session_id: &str,
        persona: PersonaTag,
    ) -> Result<FinalResponse, Error> {
        if query_text.trim().is_empty() {
            return Err(RouterError::EmptyQuery.into());
        }
        let query_id = self.next_query_id();
        let min = self.settings().min_confidence;
        let decision = self.read(|s| s.routes.classify_intent(&query_id, query_text, min))?;
        let trail = vec![TrailEntry::new(
            "classify",
            format!("{} ({:.4})", decision.chosen_domain, decision.confidence),
        )];
        let drafted = self.answer_from_domain(&decision.chosen_domain, query_text, query_text, persona, trail)?;
        self.commit_single_domain(
            Pattern::Router,
            &query_id,
            query_text,
            session_id,
            persona,
            drafted,
            Some(decision),
        )
    }

    /// The static chain: refine the request, then answer from the configured
    /// chain domain with the refined text as the search query.
    pub fn run_workflow_chain(&self, query_text: &str, session_id: &str) -> Result<FinalResponse, Error> {
        self.run_workflow_chain_as(query_text, session_id, self.settings().default_persona)
    }

    pub fn run_workflow_chain_as(
        &self,
        query_text: &str,
        session_id: &str,
        persona: PersonaTag,
    ) -> Result<FinalResponse, Error> {
        if query_text.trim().is_empty() {
            return Err(RouterError::EmptyQuery.into());
        }
        let domain = self.settings().chain_domain.clone().ok_or(RouterError::NoChainDomain)?;
        let query_id = self.next_query_id();
        let prompt = self.reasoner().render("refine-query", &[("q", query_text)])?;
        let refined = self.reasoner().complete(&prompt, persona)?;
        let refined = match refined.text.trim() {
            "" => query_text.to_string(),
            t => t.to_string(),
        };
        let trail = vec![
            TrailEntry::new("render:refine-query", prompt),
            TrailEntry::new("refine", refined.clone()),
        ];
        let drafted = self.answer_from_domain(&domain, &refined, query_text, persona, trail)?;
        self.commit_single_domain(
            Pattern::WorkflowChain,
            &query_id,
            query_text,
            session_id,
            persona,
            drafted,
            None,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn commit_single_domain(
        &self,
        pattern: Pattern,
        query_id: &str,
        query_text: &str,
        session_id: &str,
        persona: PersonaTag,
        drafted: Drafted,
        decision: Option<RoutingDecision>,
    ) -> Result<FinalResponse, Error> {
        let Drafted {
            domain,
            docs,
            guarded,
            mut trail,
        } = drafted;
        let text = self.reasoner().apply_persona(&guarded.payload, persona);
        trail.push(TrailEntry::new("persona", persona.as_str()));
        self.transact(|txn| {
            if let Some(decision) = decision {
                let seq = txn.emit(Event::RoutingDecision(decision))?.seq;
                trail[0].event_seq = Some(seq);
            }
            let memo = txn.emit(Event::MemoryAppend {
                session_id: session_id.into(),
                kind: MemoryKind::Interaction,
                content: interaction_note(query_text, &guarded.payload),
            })?;
            trail.push(TrailEntry::new("memory", "interaction recorded").at(memo.seq));
            let response = FinalResponse {
                query_id: query_id.into(),
                session_id: session_id.into(),
                query: query_text.into(),
                text,
                persona,
                provenance: Provenance {
                    pattern,
                    domains_touched: vec![domain],
                    documents: docs.iter().map(DocumentRef::from).collect(),
                    triples: Vec::new(),
                    web_results: Vec::new(),
                    agents: Vec::new(),
                    risk: guarded.risk,
                    intercepted: guarded.intercepted,
                    outcome: guarded.outcome,
                    review_id: None,
                    decision_trail: trail,
                },
            };
            txn.emit(Event::ResponseDelivered(response.clone()))?;
            Ok(response)
        })
    }
}

/// Memory content recorded for a delivered answer.
pub(crate) fn interaction_note(query_text: &str, payload: &str) -> String {
    format!("Q: {query_text}\nA: {payload}")
}

impl Guarded {
    pub(crate) fn trail_entry(&self) -> TrailEntry {
        let detail = match (&self.intercepted, self.outcome) {
            (Some(a), Outcome::Blocked) => format!(
                "block (score {:.2}; {} toxic, {} pii); refusal substituted",
                a.score, a.toxicity_count, a.pii_count
            ),
            _ => format!("allow (score {:.2})", self.risk.score),
        };
        TrailEntry::new("guardrail", detail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::Document;

    fn stores(entries: &[(&str, &str, &str)]) -> VectorStores {
        let mut s = VectorStores::new();
        for (domain, id, text) in entries {
            s.upsert(
                domain,
                Document {
                    doc_id: id.to_string(),
                    domain_tag: domain.to_string(),
                    text: text.to_string(),
                    metadata: Default::default(),
                },
            )
            .unwrap();
        }
        s
    }

    #[test]
    fn register_twice() {
        let s = stores(&[
            ("legal", "l1", "patent court ruling"),
            ("financial", "f1", "quarterly revenue"),
        ]);
        let mut t = RouteTable::new();
        t.register_domain("legal", &s).unwrap();
        t.register_domain("financial", &s).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(
            t.register_domain("legal", &s),
            Err(RouterError::DuplicateDomain("legal".into()))
        );
        assert_eq!(
            t.register_domain("nope", &s),
            Err(RouterError::UnknownDomain("nope".into()))
        );
    }

    #[test]
    fn single_doc_centroid_is_its_embedding() {
        let s = stores(&[("legal", "l1", "patent court ruling")]);
        let mut t = RouteTable::new();
        let c = t.register_domain("legal", &s).unwrap().clone();
        assert_eq!(c, embed("patent court ruling"));
    }

    #[test]
    fn empty_domain_zero_centroid() {
        let mut s = VectorStores::new();
        s.create_domain("empty");
        let mut t = RouteTable::new();
        assert!(t.register_domain("empty", &s).unwrap().is_zero());
    }

    #[test]
    fn classify_errors() {
        let t = RouteTable::new();
        assert_eq!(t.classify_intent("q", "hello", 0.0), Err(RouterError::NoDomains));
        let s = stores(&[("legal", "l1", "patent court ruling")]);
        let mut t = RouteTable::new();
        t.register_domain("legal", &s).unwrap();
        assert_eq!(t.classify_intent("q", "  ", 0.0), Err(RouterError::EmptyQuery));
        let err = t.classify_intent("q", "patent", 1.5).unwrap_err();
        assert!(matches!(err, RouterError::NoConfidentRoute { ref alternatives, .. } if alternatives.len() == 1));
    }

    #[test]
    fn tie_goes_to_smaller_tag() {
        let s = stores(&[
            ("legal", "a", "same corpus text"),
            ("financial", "a", "same corpus text"),
        ]);
        let mut t = RouteTable::new();
        t.register_domain("legal", &s).unwrap();
        t.register_domain("financial", &s).unwrap();
        let d = t.classify_intent("q", "anything at all", 0.0).unwrap();
        assert_eq!(d.alternatives[0].score, d.alternatives[1].score);
        assert_eq!(d.chosen_domain, "financial");
    }

    #[test]
    fn refresh_follows_corpus() {
        let mut s = stores(&[("legal", "l1", "patent court ruling")]);
        let mut t = RouteTable::new();
        t.register_domain("legal", &s).unwrap();
        s.upsert(
            "legal",
            Document {
                doc_id: "l2".into(),
                domain_tag: "legal".into(),
                text: "statute of limitations".into(),
                metadata: Default::default(),
            },
        )
        .unwrap();
        assert!(t.refresh("legal", &s));
        assert_eq!(t.centroid("legal"), Some(&centroid(s.domain("legal").unwrap())));
        assert!(!t.refresh("missing", &s));
    }
}
