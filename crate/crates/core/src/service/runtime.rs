//! The process-wide runtime: configuration, reasoning and guardrail
//! components, and the event-sourced state.
//!
//! Every mutation goes through [`Runtime::transact`], which holds the log
//! lock for the whole transaction. Events are applied to the state and then
//! appended, so the log's total order is the order state changed in.
//! Readers take only the state lock and never wait on pipeline work.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use serde_json::Value;

use super::config::{BackendKind, Config, SearchMode};
use super::events::{read_log, Clock, EventLog, EventRecord};
use super::state::{ConfigSummary, Effect, Event, State};
use crate::error::Error;
use crate::hitl::ReviewItem;
use crate::memory::{MemoryKind, MemoryRecord};
use crate::reasoning::{
    CapabilityLexicon, CompletionBackend, Persona, PersonaTag, Reasoner, RemoteBackend, RemoteSettings, RuleTable,
    ScriptedBackend, TemplateRegistry,
};
use crate::response::Outcome;
use crate::skills::{Guardrail, RiskAssessment, SkillRegistry, ToxicityLexicon, Verdict};
use crate::tools::{
    parse_corpus, parse_triples, Document, ScoredDocument, SearchClient, SearchFixtures, SearchResult, ToolError,
    Triple, TriplePattern,
};

/// Pipeline knobs resolved from configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub retrieval_k: usize,
    pub min_confidence: f64,
    pub refusal_text: String,
    pub rejection_text: String,
    pub failure_marker: String,
    pub none_marker: String,
    pub feedback_k: usize,
    pub parallelism: usize,
    pub chain_domain: Option<String>,
    pub default_persona: PersonaTag,
    pub domains: Vec<String>,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self::from_config(&Config::default())
    }
}

impl Settings {
    pub fn from_config(c: &Config) -> Self {
        Self {
            retrieval_k: c.retrieval_k,
            min_confidence: c.router.min_confidence,
            refusal_text: c.router.refusal_text.clone(),
            rejection_text: c.hitl.rejection_text.clone(),
            failure_marker: c.orchestrator.failure_marker.clone(),
            none_marker: c.hitl.none_marker.clone(),
            feedback_k: c.hitl.feedback_k,
            parallelism: c.parallelism,
            chain_domain: c.router.chain_domain.clone(),
            default_persona: c.default_persona,
            domains: c.router.domains.clone(),
            seed: c.seed,
            deterministic: c.deterministic,
        }
    }
}

/// A candidate payload after guardrail screening.
#[derive(Debug, Clone, PartialEq)]
pub struct Guarded {
    /// The candidate, or the refusal text if the candidate was blocked.
    pub payload: String,
    /// Assessment of `payload`.
    pub risk: RiskAssessment,
    /// Assessment of the withheld candidate.
    pub intercepted: Option<RiskAssessment>,
    pub outcome: Outcome,
}

/// An event that has been applied and logged.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub seq: u64,
    pub effect: Effect,
}

impl Applied {
    pub fn into_review(self) -> Result<ReviewItem, Error> {
        match self.effect {
            Effect::Review(item) => Ok(*item),
            other => Err(Error::InvalidEvent(format!("expected a review, got {other:?}"))),
        }
    }

    pub fn into_memory(self) -> Result<MemoryRecord, Error> {
        match self.effect {
            Effect::Memory(record) => Ok(record),
            other => Err(Error::InvalidEvent(format!("expected a memory record, got {other:?}"))),
        }
    }
}

/// Exclusive access to the log and state for one atomic unit of work.
pub struct Txn<'a> {
    log: &'a mut EventLog,
    state: &'a mut State,
}

impl Txn<'_> {
    pub fn state(&self) -> &State {
        self.state
    }

    pub fn emit(&mut self, event: Event) -> Result<Applied, Error> {
        self.emit_inner(event, None)
    }

    /// Like [`Txn::emit`], attaching measured durations outside the hash.
    pub fn emit_timed(&mut self, event: Event, timing: Value) -> Result<Applied, Error> {
        self.emit_inner(event, Some(timing))
    }

    fn emit_inner(&mut self, event: Event, timing: Option<Value>) -> Result<Applied, Error> {
        let seq = self.log.next_seq();
        let effect = self.state.apply(seq, &event)?;
        self.log.append(&event, timing)?;
        Ok(Applied { seq, effect })
    }
}

/// Folds verified records into a fresh state.
pub fn replay_records(records: &[(usize, EventRecord)]) -> Result<State, Error> {
    let mut state = State::new();
    for (line, record) in records {
        let corrupt = |reason: String| Error::CorruptLog { line: *line, reason };
        let event = record.decode().map_err(|e| corrupt(e.to_string()))?;
        state
            .apply(record.event_seq, &event)
            .map_err(|e| corrupt(e.to_string()))?;
    }
    Ok(state)
}

/// Rebuilds the state a closed log describes.
pub fn replay(path: &Path) -> Result<State, Error> {
    replay_records(&read_log(path)?)
}

pub struct Runtime {
    settings: Settings,
    reasoner: Reasoner,
    guardrail: Arc<Guardrail>,
    skills: SkillRegistry,
    search: SearchClient,
    summary: ConfigSummary,
    log: Mutex<EventLog>,
    state: RwLock<State>,
    next_query: AtomicU64,
}

impl std::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runtime")
            .field("settings", &self.settings)
            .field("event_seq", &self.event_seq())
            .finish_non_exhaustive()
    }
}

pub struct RuntimeBuilder {
    settings: Settings,
    reasoner: Reasoner,
    guardrail: Guardrail,
    search: SearchClient,
    event_log: Option<PathBuf>,
}

impl Default for RuntimeBuilder {
    fn default() -> Self {
        Self {
            settings: Settings::default(),
            reasoner: Reasoner::scripted(RuleTable::default()),
            guardrail: Guardrail::default(),
            search: SearchClient::fixtures(SearchFixtures::default()),
            event_log: None,
        }
    }
}

impl RuntimeBuilder {
    pub fn settings(mut self, settings: Settings) -> Self {
        self.settings = settings;
        self
    }

    pub fn configure(mut self, f: impl FnOnce(&mut Settings)) -> Self {
        f(&mut self.settings);
        self
    }

    pub fn reasoner(mut self, reasoner: Reasoner) -> Self {
        self.reasoner = reasoner;
        self
    }

    pub fn rules(mut self, rules: RuleTable) -> Self {
        self.reasoner.backend = Arc::new(ScriptedBackend::new(rules));
        self
    }

    pub fn backend(mut self, backend: Arc<dyn CompletionBackend>) -> Self {
        self.reasoner.backend = backend;
        self
    }

    pub fn lexicon(mut self, lexicon: CapabilityLexicon) -> Self {
        self.reasoner.lexicon = lexicon;
        self
    }

    pub fn guardrail(mut self, guardrail: Guardrail) -> Self {
        self.guardrail = guardrail;
        self
    }

    pub fn search(mut self, search: SearchClient) -> Self {
        self.search = search;
        self
    }

    pub fn search_fixtures(self, fixtures: SearchFixtures) -> Self {
        self.search(SearchClient::fixtures(fixtures))
    }

    /// Persist to `path`. An existing log is replayed first and appended to.
    pub fn event_log(mut self, path: impl Into<PathBuf>) -> Self {
        self.event_log = Some(path.into());
        self
    }

    pub fn build(self) -> Result<Runtime, Error> {
        let clock = if self.settings.deterministic {
            Clock::Deterministic {
                seed: self.settings.seed,
            }
        } else {
            Clock::Wall
        };
        let (log, state) = match &self.event_log {
            Some(path) if path.exists() => {
                let records = read_log(path)?;
                let state = replay_records(&records)?;
                let log = EventLog::open(path, records.into_iter().map(|(_, r)| r).collect(), clock)?;
                (log, state)
            }
            Some(path) => (EventLog::open(path, Vec::new(), clock)?, State::new()),
            None => (EventLog::in_memory(clock), State::new()),
        };
        let guardrail = Arc::new(self.guardrail);
        let summary = ConfigSummary {
            domains: self.settings.domains.clone(),
            seed: self.settings.seed,
            deterministic: self.settings.deterministic,
            backend: self.reasoner.backend.backend_id().to_string(),
            retrieval_k: self.settings.retrieval_k,
            threshold: guardrail.threshold(),
        };
        let runtime = Runtime {
            next_query: AtomicU64::new(state.max_query_number()),
            skills: SkillRegistry::with_builtins(guardrail.clone()),
            settings: self.settings,
            reasoner: self.reasoner,
            guardrail,
            search: self.search,
            summary: summary.clone(),
            log: Mutex::new(log),
            state: RwLock::new(state),
        };
        runtime.transact(|txn| txn.emit(Event::ConfigLoaded(summary)))?;
        Ok(runtime)
    }
}

fn read_file(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|_| super::config::ConfigError::MissingFile(path.to_path_buf()).into())
}

impl Runtime {
    pub fn builder() -> RuntimeBuilder {
        RuntimeBuilder::default()
    }

    /// An in-memory runtime with default settings and no rules.
    pub fn in_memory() -> Result<Self, Error> {
        Self::builder().build()
    }

    pub fn from_config(config: &Config) -> Result<Self, Error> {
        let templates = match config.path(|p| &p.templates) {
            Some(dir) => TemplateRegistry::load_dir(&dir)?,
            None => TemplateRegistry::with_defaults(),
        };
        let lexicon = match config.path(|p| &p.lexicon) {
            Some(path) => {
                serde_json::from_str(&read_file(&path)?).map_err(|e| super::config::ConfigError::InvalidValue {
                    key: "paths.lexicon".into(),
                    reason: e.to_string(),
                })?
            }
            None => CapabilityLexicon::default(),
        };
        let backend: Arc<dyn CompletionBackend> = match config.backend.kind {
            BackendKind::Scripted => {
                let rules = match config.path(|p| &p.rules) {
                    Some(path) => RuleTable::from_json(&read_file(&path)?)?,
                    None => RuleTable::default(),
                };
                Arc::new(ScriptedBackend::new(rules))
            }
            BackendKind::Remote => Arc::new(RemoteBackend::new(RemoteSettings {
                url: config.backend.url.clone().unwrap_or_default(),
                model: config.backend.model.clone(),
                token: std::env::var(crate::reasoning::backend::TOKEN_ENV).ok(),
                max_retries: config.backend.max_retries,
                timeout: Duration::from_millis(config.backend.timeout_ms),
                max_in_flight: config.backend.max_in_flight,
            })?),
        };
        let mut reasoner = Reasoner {
            templates,
            backend,
            lexicon,
            personas: Default::default(),
            max_length: config.max_length,
        };
        for (tag, directives) in &config.personas {
            reasoner.personas.set(Persona::new(*tag, directives.clone())?);
        }
        let toxicity = match config.path(|p| &p.toxicity) {
            Some(path) => ToxicityLexicon::from_json(&read_file(&path)?)?,
            None => ToxicityLexicon::builtin(),
        };
        let search = match config.search.mode {
            SearchMode::Fixture => {
                let fixtures = match config.path(|p| &p.search_fixtures) {
                    Some(path) => serde_json::from_str(&read_file(&path)?).map_err(|e| {
                        super::config::ConfigError::InvalidValue {
                            key: "paths.search_fixtures".into(),
                            reason: e.to_string(),
                        }
                    })?,
                    None => SearchFixtures::default(),
                };
                SearchClient::fixtures(fixtures)
            }
            SearchMode::Live => SearchClient::live(
                config.search.endpoint.clone().unwrap_or_default(),
                Duration::from_millis(config.search.timeout_ms),
            )?,
        };
        let mut builder = Self::builder()
            .settings(Settings::from_config(config))
            .reasoner(reasoner)
            .guardrail(Guardrail::new(toxicity, config.guardrail.threshold))
            .search(search);
        if let Some(log) = config.path(|p| &p.event_log) {
            builder = builder.event_log(log);
        }
        let runtime = builder.build()?;
        if config.preload && runtime.event_seq() == 1 {
            if let Some(dir) = config.path(|p| &p.corpus) {
                runtime.ingest_corpus_dir(&dir)?;
            }
            if let Some(kg) = config.path(|p| &p.kg) {
                runtime.add_triples(parse_triples(&read_file(&kg)?)?)?;
            }
        }
        Ok(runtime)
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn reasoner(&self) -> &Reasoner {
        &self.reasoner
    }

    pub fn guardrail(&self) -> &Guardrail {
        &self.guardrail
    }

    pub fn skills(&self) -> &SkillRegistry {
        &self.skills
    }

    pub fn search_client(&self) -> &SearchClient {
        &self.search
    }

    pub fn config_summary(&self) -> &ConfigSummary {
        &self.summary
    }

    pub fn next_query_id(&self) -> String {
        format!("q-{:06}", self.next_query.fetch_add(1, Ordering::SeqCst) + 1)
    }

    /// Runs `f` against a consistent snapshot of the state.
    pub fn read<R>(&self, f: impl FnOnce(&State) -> R) -> R {
        f(&self.state.read().expect("state lock"))
    }

    /// Runs `f` with exclusive access to the log and state. Events emitted
    /// inside `f` are contiguous in the log.
    pub fn transact<R>(&self, f: impl FnOnce(&mut Txn<'_>) -> Result<R, Error>) -> Result<R, Error> {
        let mut log = self.log.lock().expect("event log lock");
        let mut state = self.state.write().expect("state lock");
        f(&mut Txn {
            log: &mut log,
            state: &mut state,
        })
    }

    /// Screens a candidate payload; blocked candidates become the refusal text.
    pub fn guard(&self, candidate: String) -> Guarded {
        let assessment = self.guardrail.assess_risk(&candidate);
        if assessment.verdict == Verdict::Allow {
            return Guarded {
                payload: candidate,
                risk: assessment,
                intercepted: None,
                outcome: Outcome::Delivered,
            };
        }
        let refusal = self.settings.refusal_text.clone();
        Guarded {
            risk: self.guardrail.assess_risk(&refusal),
            payload: refusal,
            intercepted: Some(assessment),
            outcome: Outcome::Blocked,
        }
    }

    pub fn event_seq(&self) -> u64 {
        self.log.lock().expect("event log lock").last_seq()
    }

    pub fn events(&self) -> Vec<EventRecord> {
        self.log.lock().expect("event log lock").records().to_vec()
    }

    pub fn log_path(&self) -> Option<PathBuf> {
        self.log.lock().expect("event log lock").path().map(Path::to_path_buf)
    }

    pub fn state_digest(&self) -> String {
        self.read(State::digest)
    }

    pub fn append_memory(&self, session_id: &str, kind: MemoryKind, content: &str) -> Result<MemoryRecord, Error> {
        if content.trim().is_empty() {
            return Err(crate::memory::MemoryError::EmptyContent.into());
        }
        self.transact(|txn| {
            txn.emit(Event::MemoryAppend {
                session_id: session_id.into(),
                kind,
                content: content.into(),
            })?
            .into_memory()
        })
    }

    pub fn recall_session(&self, session_id: &str, limit: usize) -> Vec<MemoryRecord> {
        self.read(|s| s.memory.recall_session(session_id, limit))
    }

    pub fn recall_relevant(
        &self,
        query_text: &str,
        k: usize,
        session_id: Option<&str>,
    ) -> Result<Vec<(MemoryRecord, f64)>, Error> {
        Ok(self.read(|s| s.memory.recall_relevant(query_text, k, session_id))?)
    }

    /// Upserts documents into `domain` in one transaction.
    pub fn upsert_documents(&self, domain: &str, documents: Vec<Document>) -> Result<usize, Error> {
        if domain.trim().is_empty() {
            return Err(ToolError::EmptyField("domain").into());
        }
        for d in &documents {
            if d.doc_id.is_empty() {
                return Err(ToolError::EmptyField("doc_id").into());
            }
            if d.text.trim().is_empty() {
                return Err(ToolError::EmptyContent.into());
            }
        }
        let n = documents.len();
        self.transact(|txn| {
            for document in documents {
                txn.emit(Event::DocUpsert {
                    domain: domain.into(),
                    document,
                })?;
            }
            Ok(n)
        })
    }

    /// Parses a JSON Lines corpus and upserts it into `domain`.
    pub fn ingest_jsonl(&self, domain: &str, text: &str) -> Result<usize, Error> {
        self.upsert_documents(domain, parse_corpus(text)?)
    }

    /// Ingests every `<domain>.jsonl` file in `dir`, in file-name order.
    pub fn ingest_corpus_dir(&self, dir: &Path) -> Result<usize, Error> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        let mut total = 0;
        for file in files {
            let Some(domain) = file.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            total += self.ingest_jsonl(domain, &read_file(&file)?)?;
        }
        Ok(total)
    }

    pub fn delete_document(&self, domain: &str, doc_id: &str) -> Result<bool, Error> {
        self.transact(|txn| {
            match txn
                .emit(Event::DocDelete {
                    domain: domain.into(),
                    doc_id: doc_id.into(),
                })?
                .effect
            {
                Effect::Deleted(removed) => Ok(removed),
                other => Err(Error::InvalidEvent(format!("expected a deletion, got {other:?}"))),
            }
        })
    }

    pub fn search(&self, domain: &str, query_text: &str, k: usize) -> Result<Vec<ScoredDocument>, Error> {
        Ok(self.read(|s| s.corpora.search(domain, query_text, k))?)
    }

    /// Adds triples in one transaction; returns how many were new.
    pub fn add_triples(&self, triples: Vec<Triple>) -> Result<usize, Error> {
        for t in &triples {
            for (name, v) in [
                ("subject", &t.subject),
                ("predicate", &t.predicate),
                ("object", &t.object),
            ] {
                if v.trim().is_empty() {
                    return Err(ToolError::EmptyField(name).into());
                }
            }
        }
        self.transact(|txn| {
            let mut added = 0;
            for t in triples {
                if let Effect::TripleAdded(true) = txn.emit(Event::KgAdd(t))?.effect {
                    added += 1;
                }
            }
            Ok(added)
        })
    }

    pub fn kg_query(&self, pattern: &TriplePattern) -> Vec<Triple> {
        self.read(|s| s.kg.query(pattern))
    }

    pub fn web_search(&self, query_text: &str) -> Result<Vec<SearchResult>, Error> {
        Ok(self.search.web_search(query_text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_runtime_logs_config_first() {
        let rt = Runtime::in_memory().unwrap();
        assert_eq!(rt.event_seq(), 1);
        assert_eq!(rt.events()[0].kind, super::super::events::EventKind::ConfigLoaded);
    }

    #[test]
    fn query_ids_are_sequential() {
        let rt = Runtime::in_memory().unwrap();
        assert_eq!(rt.next_query_id(), "q-000001");
        assert_eq!(rt.next_query_id(), "q-000002");
    }

    #[test]
    fn memory_through_log() {
        let rt = Runtime::in_memory().unwrap();
        let r = rt.append_memory("s1", MemoryKind::Preference, "likes brevity").unwrap();
        assert_eq!(r.seq, 1);
        assert_eq!(rt.event_seq(), 2);
        assert!(rt.append_memory("s1", MemoryKind::Preference, " ").is_err());
        assert_eq!(rt.event_seq(), 2);
    }

    #[test]
    fn guard_substitutes_refusal() {
        let rt = Runtime::in_memory().unwrap();
        let g = rt.guard("mail me at a@b.co".into());
        assert_eq!(g.payload, rt.settings().refusal_text);
        assert_eq!(g.outcome, Outcome::Blocked);
        assert_eq!(g.intercepted.unwrap().verdict, Verdict::Block);
        assert_eq!(g.risk.verdict, Verdict::Allow);
    }
}
