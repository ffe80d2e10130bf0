//! The orchestrated multi-agent pattern: a lead agent decomposes the query,
//! specialist agents work the subtasks in parallel against their own tools,
//! a guardrail agent screens their output, and the lead agent synthesizes.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::memory::MemoryKind;
use crate::reasoning::{Capability, PersonaTag};
use crate::response::{DocumentRef, FinalResponse, Outcome, Pattern, Provenance, TrailEntry};
use crate::router::{interaction_note, RouterError, CONTEXT_SEPARATOR};
use crate::service::runtime::Runtime;
use crate::service::state::Event;
use crate::skills::{RiskAssessment, Verdict};
use crate::tools::{SearchResult, Triple, TriplePattern, WILDCARD};

pub const AGENT_VECTOR: &str = "agent-1-vector";
pub const AGENT_KG: &str = "agent-2-kg";
pub const AGENT_SEARCH: &str = "agent-3-search";
pub const AGENT_GUARDRAIL: &str = "agent-4-guardrail";

pub fn agent_for(capability: Capability) -> &'static str {
    match capability {
        Capability::VectorSearch => AGENT_VECTOR,
        Capability::KnowledgeGraph => AGENT_KG,
        Capability::WebSearch => AGENT_SEARCH,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtask {
    pub index: usize,
    pub description: String,
    pub capability: Capability,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_domain: Option<String>,
}

/// What an agent consulted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub documents: Vec<DocumentRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triples: Vec<Triple>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub web_results: Vec<SearchResult>,
}

impl Evidence {
    pub fn is_empty(&self) -> bool {
        self.documents.is_empty() && self.triples.is_empty() && self.web_results.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResult {
    pub subtask_index: usize,
    pub agent_name: String,
    pub content: String,
    pub provenance: Evidence,
    /// Set when the agent could not complete and `content` is the failure marker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Wall-clock time spent. Not serialized: it varies run to run.
    #[serde(skip)]
    pub duration: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestrationRecord {
    pub query_id: String,
    pub plan: Vec<Subtask>,
    pub results: Vec<AgentResult>,
    pub assessment: RiskAssessment,
    pub outcome: Outcome,
}

/// Joins result contents in index order, the text the guardrail agent screens.
pub fn combined_content(results: &[AgentResult]) -> String {
    results
        .iter()
        .map(|r| r.content.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Lowercased alphanumeric tokens, used as knowledge-graph subjects and predicates.
pub fn kg_tokens(description: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    description
        .split(|c: char| !c.is_alphanumeric() && c != '_' && c != '-')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

fn labelled<T>(items: &[T], line: impl Fn(&T) -> String) -> String {
    items.iter().map(line).collect::<Vec<_>>().join(CONTEXT_SEPARATOR)
}

/// Result of synthesis before it is committed to the log.
struct Composed {
    payload: String,
    risk: RiskAssessment,
    intercepted: Option<RiskAssessment>,
    /// The assessment that decided the outcome.
    deciding: RiskAssessment,
    outcome: Outcome,
    trail: Vec<TrailEntry>,
}

impl Runtime {
    /// Decompose into subtasks and pick a target domain for each vector
    /// subtask by routing its description.
    pub fn plan(&self, query_text: &str) -> Result<Vec<Subtask>, Error> {
        if query_text.trim().is_empty() {
            return Err(RouterError::EmptyQuery.into());
        }
        let drafts = self.reasoner().decompose(query_text)?;
        if drafts.is_empty() {
            return Err(RouterError::EmptyQuery.into());
        }
        let min = self.settings().min_confidence;
        Ok(self.read(|s| {
            drafts
                .into_iter()
                .enumerate()
                .map(|(index, d)| {
                    let target_domain = (d.capability_hint == Capability::VectorSearch)
                        .then(|| s.routes.classify_intent("", &d.description, min).ok())
                        .flatten()
                        .map(|r| r.chosen_domain);
                    Subtask {
                        index,
                        description: d.description,
                        capability: d.capability_hint,
                        target_domain,
                    }
                })
                .collect()
        }))
    }

    pub fn dispatch(&self, plan: &[Subtask], session_id: &str) -> Vec<AgentResult> {
        self.dispatch_with_jitter(plan, session_id, |_| Duration::ZERO)
    }

    /// Like [`Runtime::dispatch`], sleeping `delay(index)` before each
    /// subtask starts. Lets tests force arbitrary completion orders.
    pub fn dispatch_with_jitter(
        &self,
        plan: &[Subtask],
        _session_id: &str,
        delay: impl Fn(usize) -> Duration + Sync,
    ) -> Vec<AgentResult> {
        let n = plan.len();
        let workers = self.settings().parallelism.clamp(1, n.max(1));
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<AgentResult>>> = Mutex::new(vec![None; n]);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let pause = delay(i);
                    if !pause.is_zero() {
                        std::thread::sleep(pause);
                    }
                    let result = self.run_agent(&plan[i]);
                    slots.lock().expect("result slots")[i] = Some(result);
                });
            }
        });
        slots
            .into_inner()
            .expect("result slots")
            .into_iter()
            .map(|r| r.expect("every subtask produces a result"))
            .collect()
    }

    fn run_agent(&self, subtask: &Subtask) -> AgentResult {
        let started = Instant::now();
        let agent = agent_for(subtask.capability);
        let (content, provenance, failure) = match self.agent_work(subtask) {
            Ok((content, evidence)) => (content, evidence, None),
            Err(reason) => (
                self.settings().failure_marker.clone(),
                Evidence::default(),
                Some(reason),
            ),
        };
        AgentResult {
            subtask_index: subtask.index,
            agent_name: agent.into(),
            content,
            provenance,
            failure,
            duration: started.elapsed(),
        }
    }

    fn agent_work(&self, subtask: &Subtask) -> Result<(String, Evidence), String> {
        let q = subtask.description.as_str();
        let mut evidence = Evidence::default();
        let (template, ctx) = match subtask.capability {
            Capability::VectorSearch => {
                let domain = subtask
                    .target_domain
                    .as_deref()
                    .ok_or_else(|| "no domain matched the subtask".to_string())?;
                let k = self.settings().retrieval_k;
                let docs = self
                    .read(|s| s.corpora.search(domain, q, k))
                    .map_err(|e| e.to_string())?;
                if docs.is_empty() {
                    return Err(format!("domain `{domain}` returned no documents"));
                }
                evidence.documents = docs.iter().map(DocumentRef::from).collect();
                (
                    "agent-vector",
                    labelled(&docs, |d| format!("[{}] {}", d.document.doc_id, d.document.text)),
                )
            }
            Capability::KnowledgeGraph => {
                let triples = self.read(|s| {
                    let mut found = BTreeSet::new();
                    for token in kg_tokens(q) {
                        found.extend(s.kg.query(&TriplePattern::new(token.as_str(), WILDCARD, WILDCARD)));
                        found.extend(s.kg.query(&TriplePattern::new(WILDCARD, token.as_str(), WILDCARD)));
                    }
                    found.into_iter().collect::<Vec<_>>()
                });
                if triples.is_empty() {
                    return Err("no matching facts in the knowledge graph".into());
                }
                let ctx = labelled(&triples, |t| format!("{} {} {}", t.subject, t.predicate, t.object));
                evidence.triples = triples;
                ("agent-kg", ctx)
            }
            Capability::WebSearch => {
                let results = self.search_client().web_search(q).map_err(|e| e.to_string())?;
                if results.is_empty() {
                    return Err("search returned no results".into());
                }
                let ctx = labelled(&results, |r| {
                    format!("{}. {}: {} ({})", r.rank, r.title, r.snippet, r.source_url)
                });
                evidence.web_results = results;
                ("agent-search", ctx)
            }
        };
        let prompt = self
            .reasoner()
            .render(template, &[("q", q), ("ctx", &ctx)])
            .map_err(|e| e.to_string())?;
        let completion = self
            .reasoner()
            .complete(&prompt, PersonaTag::Professional)
            .map_err(|e| e.to_string())?;
        Ok((completion.text, evidence))
    }

    /// The guardrail agent's screen of all agent output.
    pub fn validate(&self, results: &[AgentResult]) -> RiskAssessment {
        self.guardrail().assess_risk(&combined_content(results))
    }

    fn compose(
        &self,
        query_text: &str,
        results: &[AgentResult],
        assessment: &RiskAssessment,
        persona: PersonaTag,
    ) -> Result<Composed, Error> {
        let mut trail = vec![TrailEntry::new(
            AGENT_GUARDRAIL,
            format!("{} (score {:.2})", verdict_word(assessment.verdict), assessment.score),
        )];
        if assessment.verdict == Verdict::Block {
            let refusal = self.settings().refusal_text.clone();
            trail.push(TrailEntry::new("synthesize", "skipped; refusal substituted"));
            return Ok(Composed {
                risk: self.guardrail().assess_risk(&refusal),
                payload: refusal,
                intercepted: Some(assessment.clone()),
                deciding: assessment.clone(),
                outcome: Outcome::Blocked,
                trail,
            });
        }
        let parts = combined_content(results);
        let prompt = self
            .reasoner()
            .render("synthesize", &[("q", query_text), ("parts", &parts)])?;
        trail.push(TrailEntry::new("render:synthesize", prompt.clone()));
        let completion = self.reasoner().complete(&prompt, persona)?;
        trail.push(TrailEntry::new(
            "complete",
            format!("{} ({:?})", completion.backend_id, completion.finish_reason),
        ));
        let synthesized = self.guardrail().assess_risk(&completion.text);
        let guarded = self.guard(completion.text);
        trail.push(guarded.trail_entry());
        Ok(Composed {
            payload: guarded.payload,
            risk: guarded.risk,
            intercepted: guarded.intercepted,
            deciding: synthesized,
            outcome: guarded.outcome,
            trail,
        })
    }

    /// Integrate agent results into one response and record it.
    pub fn synthesize(
        &self,
        query_text: &str,
        results: &[AgentResult],
        assessment: &RiskAssessment,
        persona: PersonaTag,
        session_id: &str,
    ) -> Result<FinalResponse, Error> {
        let query_id = self.next_query_id();
        let composed = self.compose(query_text, results, assessment, persona)?;
        self.commit_orchestrated(&query_id, query_text, session_id, persona, None, results, composed)
    }

    /// Plan, dispatch, validate, synthesize; the whole run is recorded as one
    /// orchestration event.
    pub fn run_orchestrated(
        &self,
        query_text: &str,
        session_id: &str,
        persona: PersonaTag,
    ) -> Result<FinalResponse, Error> {
        self.run_orchestrated_with_jitter(query_text, session_id, persona, |_| Duration::ZERO)
    }

    pub fn run_orchestrated_with_jitter(
        &self,
        query_text: &str,
        session_id: &str,
        persona: PersonaTag,
        delay: impl Fn(usize) -> Duration + Sync,
    ) -> Result<FinalResponse, Error> {
        let plan = self.plan(query_text)?;
        let query_id = self.next_query_id();
        let results = self.dispatch_with_jitter(&plan, session_id, delay);
        let assessment = self.validate(&results);
        let composed = self.compose(query_text, &results, &assessment, persona)?;
        self.commit_orchestrated(
            &query_id,
            query_text,
            session_id,
            persona,
            Some(plan),
            &results,
            composed,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn commit_orchestrated(
        &self,
        query_id: &str,
        query_text: &str,
        session_id: &str,
        persona: PersonaTag,
        plan: Option<Vec<Subtask>>,
        results: &[AgentResult],
        composed: Composed,
    ) -> Result<FinalResponse, Error> {
        let Composed {
            payload,
            risk,
            intercepted,
            deciding,
            outcome,
            trail: tail,
        } = composed;
        let mut trail = Vec::new();
        let mut domains = Vec::new();
        let mut documents = Vec::new();
        let mut triples = Vec::new();
        let mut web_results = Vec::new();
        let mut agents: Vec<String> = Vec::new();
        for r in results {
            let detail = match &r.failure {
                Some(reason) => format!("subtask {} failed: {reason}", r.subtask_index),
                None => format!("subtask {} answered", r.subtask_index),
            };
            trail.push(TrailEntry::new(r.agent_name.clone(), detail));
            if r.failure.is_some() {
                continue;
            }
            if !agents.contains(&r.agent_name) {
                agents.push(r.agent_name.clone());
            }
            for d in &r.provenance.documents {
                if !domains.contains(&d.domain) {
                    domains.push(d.domain.clone());
                }
            }
            documents.extend(r.provenance.documents.iter().cloned());
            triples.extend(r.provenance.triples.iter().cloned());
            web_results.extend(r.provenance.web_results.iter().cloned());
        }
        agents.push(AGENT_GUARDRAIL.into());
        trail.extend(tail);
        let text = self.reasoner().apply_persona(&payload, persona);
        trail.push(TrailEntry::new("persona", persona.as_str()));
        self.transact(|txn| {
            if let Some(plan) = plan {
                let record = OrchestrationRecord {
                    query_id: query_id.into(),
                    plan,
                    results: results.to_vec(),
                    assessment: deciding,
                    outcome,
                };
                let durations: Vec<u128> = results.iter().map(|r| r.duration.as_micros()).collect();
                let seq = txn
                    .emit_timed(
                        Event::Orchestration(record),
                        serde_json::json!({ "agent_durations_us": durations }),
                    )?
                    .seq;
                trail.insert(
                    0,
                    TrailEntry::new("plan", format!("{} subtasks", results.len())).at(seq),
                );
            }
            let memo = txn.emit(Event::MemoryAppend {
                session_id: session_id.into(),
                kind: MemoryKind::Interaction,
                content: interaction_note(query_text, &payload),
            })?;
            trail.push(TrailEntry::new("memory", "interaction recorded").at(memo.seq));
            let response = FinalResponse {
                query_id: query_id.into(),
                session_id: session_id.into(),
                query: query_text.into(),
                text,
                persona,
                provenance: Provenance {
                    pattern: Pattern::Orchestrated,
                    domains_touched: domains,
                    documents,
                    triples,
                    web_results,
                    agents,
                    risk,
                    intercepted,
                    outcome,
                    review_id: None,
                    decision_trail: trail,
                },
            };
            txn.emit(Event::ResponseDelivered(response.clone()))?;
            Ok(response)
        })
    }
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Allow => "allow",
        Verdict::Block => "block",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_lowercased_and_unique() {
        assert_eq!(
            kg_tokens("Customer feedback, customer churn"),
            vec!["customer", "feedback", "churn"]
        );
        assert!(kg_tokens("  ").is_empty());
    }

    #[test]
    fn agent_names_follow_capability() {
        assert_eq!(agent_for(Capability::VectorSearch), "agent-1-vector");
        assert_eq!(agent_for(Capability::KnowledgeGraph), "agent-2-kg");
        assert_eq!(agent_for(Capability::WebSearch), "agent-3-search");
    }

    #[test]
    fn combined_content_in_order() {
        let r = |i: usize, c: &str| AgentResult {
            subtask_index: i,
            agent_name: AGENT_VECTOR.into(),
            content: c.into(),
            provenance: Evidence::default(),
            failure: None,
            duration: Duration::ZERO,
        };
        assert_eq!(combined_content(&[r(0, "a"), r(1, "b")]), "a\nb");
        assert_eq!(combined_content(&[]), "");
    }

    #[test]
    fn duration_not_serialized() {
        let r = AgentResult {
            subtask_index: 0,
            agent_name: AGENT_KG.into(),
            content: "x".into(),
            provenance: Evidence::default(),
            failure: None,
            duration: Duration::from_millis(7),
        };
        let v = serde_json::to_value(&r).unwrap();
        assert!(v.get("duration").is_none());
    }
}
