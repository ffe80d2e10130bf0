//! Scenario scripts: named, ordered steps run against the API, with
//! assertions over earlier steps' results.
//!
//! A script is JSON:
//!
//! ```json
//! {
//!   "name": "customer-support",
//!   "steps": [
//!     {"id": "load", "action": "ingest", "domain": "support", "path": "../corpus/support.jsonl"},
//!     {"id": "ask", "action": "query", "session": "s1", "pattern": "router", "text": "Where is my order?"},
//!     {"id": "check", "action": "assert", "step": "ask",
//!      "checks": [{"path": "/response/provenance/domains_touched", "equals": ["support"]}]}
//!   ]
//! }
//! ```
//!
//! Paths in `ingest` steps are relative to the script. An `ingest` without a
//! `domain` loads knowledge-graph triples. Assertions re-read the referenced
//! query or review through the API when they run, and select values with a
//! JSON pointer in which `*` maps over an array. A query that went to review
//! carries its review item under `review`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;

use crate::reasoning::PersonaTag;
use crate::service::{ApiError, Client, DecisionRequest, QueryRequest, QueryStatus, Runtime};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario `{0}` not found")]
    NotFound(String),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid scenario {path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase", deny_unknown_fields)]
pub enum Step {
    Ingest {
        id: String,
        path: PathBuf,
        #[serde(default)]
        domain: Option<String>,
        #[serde(default)]
        expect_error: Option<String>,
    },
    Query {
        id: String,
        session: String,
        pattern: String,
        text: String,
        #[serde(default)]
        persona: Option<PersonaTag>,
        #[serde(default)]
        domain: Option<String>,
        #[serde(default)]
        expect_error: Option<String>,
    },
    Decide {
        id: String,
        /// Id of the hitl `query` step whose review is decided.
        review: String,
        status: String,
        #[serde(default)]
        note: Option<String>,
        #[serde(default)]
        replacement_text: Option<String>,
        #[serde(default)]
        expect_error: Option<String>,
    },
    Assert {
        id: String,
        step: String,
        checks: Vec<Check>,
    },
}

impl Step {
    pub fn id(&self) -> &str {
        match self {
            Self::Ingest { id, .. } | Self::Query { id, .. } | Self::Decide { id, .. } | Self::Assert { id, .. } => id,
        }
    }

    pub fn action(&self) -> &'static str {
        match self {
            Self::Ingest { .. } => "ingest",
            Self::Query { .. } => "query",
            Self::Decide { .. } => "decide",
            Self::Assert { .. } => "assert",
        }
    }
}

/// One assertion. Every operator present must hold.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub path: String,
    #[serde(default)]
    pub equals: Option<Value>,
    #[serde(default)]
    pub length: Option<usize>,
    #[serde(default)]
    pub contains: Option<Value>,
    #[serde(default)]
    pub excludes: Option<Value>,
    #[serde(default)]
    pub distinct: Option<bool>,
    #[serde(default)]
    pub absent: Option<bool>,
    /// Some string anywhere under the selection contains this text.
    #[serde(default)]
    pub mentions: Option<String>,
}

impl ScenarioScript {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ScenarioError> {
        let script: Self = serde_json::from_str(text).map_err(|e| ScenarioError::Invalid {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        script.validate(path)?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Loads `<dir>/<name>.json`.
    pub fn find(dir: &Path, name: &str) -> Result<(Self, PathBuf), ScenarioError> {
        let path = dir.join(format!("{name}.json"));
        if !path.is_file() {
            return Err(ScenarioError::NotFound(name.into()));
        }
        Ok((Self::load(&path)?, path))
    }

    /// Step ids are unique, and references point at earlier steps of the right kind.
    fn validate(&self, path: &Path) -> Result<(), ScenarioError> {
        let invalid = |reason: String| ScenarioError::Invalid {
            path: path.to_path_buf(),
            reason,
        };
        let mut seen: BTreeMap<&str, &Step> = BTreeMap::new();
        for step in &self.steps {
            match step {
                Step::Decide { review, .. } => match seen.get(review.as_str()) {
                    Some(Step::Query { .. }) => {}
                    _ => {
                        return Err(invalid(format!(
                            "step `{}` decides unknown query step `{review}`",
                            step.id()
                        )))
                    }
                },
                Step::Assert { step: target, .. } if !seen.contains_key(target.as_str()) => {
                    return Err(invalid(format!(
                        "step `{}` asserts on unknown step `{target}`",
                        step.id()
                    )));
                }
                _ => {}
            }
            if seen.insert(step.id(), step).is_some() {
                return Err(invalid(format!("duplicate step id `{}`", step.id())));
            }
        }
        Ok(())
    }
}

/// All scripts in `dir`, sorted by name.
pub fn list(dir: &Path) -> Result<Vec<String>, ScenarioError> {
    let entries = std::fs::read_dir(dir).map_err(|source| ScenarioError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    names.sort();
    Ok(names)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub index: usize,
    pub id: String,
    pub action: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioReport {
    pub name: String,
    pub rows: Vec<Row>,
    pub event_seq: u64,
    pub digest: String,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.passed)
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}", self.name)?;
        let width = self.rows.iter().map(|r| r.id.len()).max().unwrap_or(0).max(4);
        for r in &self.rows {
            let mark = if r.passed { "PASS" } else { "FAIL" };
            writeln!(
                f,
                "{:>3}  {:<width$}  {:<6}  {mark}  {}",
                r.index + 1,
                r.id,
                r.action,
                r.detail
            )?;
        }
        let failed = self.rows.iter().filter(|r| !r.passed).count();
        writeln!(
            f,
            "result: {} ({} steps, {failed} failed)",
            if failed == 0 { "pass" } else { "fail" },
            self.rows.len()
        )?;
        writeln!(f, "event_seq: {}", self.event_seq)?;
        write!(f, "state digest: {}", self.digest)
    }
}

/// What a completed step left behind for later assertions.
#[derive(Debug, Clone)]
enum Output {
    Ingested(usize),
    Query(String),
    Review(String),
    Failed(ApiError),
}

/// Selects by JSON pointer; a `*` segment maps the rest of the path over an
/// array, with null for elements that lack it.
pub fn select(value: &Value, pointer: &str) -> Option<Value> {
    let segments: Vec<String> = if pointer.is_empty() {
        Vec::new()
    } else {
        pointer
            .strip_prefix('/')?
            .split('/')
            .map(|s| s.replace("~1", "/").replace("~0", "~"))
            .collect()
    };
    select_in(value, &segments)
}

fn select_in(value: &Value, segments: &[String]) -> Option<Value> {
    let Some((head, rest)) = segments.split_first() else {
        return Some(value.clone());
    };
    if head == "*" {
        let items = value.as_array()?;
        return Some(Value::Array(
            items
                .iter()
                .map(|v| select_in(v, rest).unwrap_or(Value::Null))
                .collect(),
        ));
    }
    let next = match value {
        Value::Object(map) => map.get(head.as_str())?,
        Value::Array(items) => items.get(head.parse::<usize>().ok()?)?,
        _ => return None,
    };
    select_in(next, rest)
}

fn contains(haystack: &Value, needle: &Value) -> bool {
    match (haystack, needle) {
        (Value::String(h), Value::String(n)) => h.contains(n.as_str()),
        (Value::Array(items), n) => items.contains(n),
        _ => false,
    }
}

fn mentions(value: &Value, needle: &str) -> bool {
    match value {
        Value::String(s) => s.contains(needle),
        Value::Array(items) => items.iter().any(|v| mentions(v, needle)),
        Value::Object(map) => map.values().any(|v| mentions(v, needle)),
        _ => false,
    }
}

fn length(value: &Value) -> Option<usize> {
    match value {
        Value::Array(a) => Some(a.len()),
        Value::Object(o) => Some(o.len()),
        Value::String(s) => Some(s.chars().count()),
        _ => None,
    }
}

fn short(value: &Value) -> String {
    let text = value.to_string();
    match text.char_indices().nth(60) {
        Some((i, _)) => format!("{}...", &text[..i]),
        None => text,
    }
}

impl Check {
    /// Descriptions of every operator that did not hold.
    pub fn evaluate(&self, subject: &Value) -> Vec<String> {
        let selected = select(subject, &self.path);
        let mut failures = Vec::new();
        let path = &self.path;
        if let Some(want_absent) = self.absent {
            let is_absent = selected.as_ref().is_none_or(Value::is_null);
            if is_absent != want_absent {
                failures.push(format!("{path}: absent expected {want_absent}"));
            }
        }
        let has_value_ops = self.equals.is_some()
            || self.length.is_some()
            || self.contains.is_some()
            || self.excludes.is_some()
            || self.distinct.is_some()
            || self.mentions.is_some();
        let Some(value) = selected else {
            if has_value_ops {
                failures.push(format!("{path}: not found"));
            }
            return failures;
        };
        if let Some(want) = &self.equals {
            if &value != want {
                failures.push(format!("{path}: expected {} got {}", short(want), short(&value)));
            }
        }
        if let Some(want) = self.length {
            match length(&value) {
                Some(n) if n == want => {}
                Some(n) => failures.push(format!("{path}: expected length {want} got {n}")),
                None => failures.push(format!("{path}: has no length")),
            }
        }
        if let Some(needle) = &self.contains {
            if !contains(&value, needle) {
                failures.push(format!("{path}: does not contain {}", short(needle)));
            }
        }
        if let Some(needle) = &self.excludes {
            if contains(&value, needle) {
                failures.push(format!("{path}: contains {}", short(needle)));
            }
        }
        if let Some(needle) = &self.mentions {
            if !mentions(&value, needle) {
                failures.push(format!("{path}: never mentions {needle:?}"));
            }
        }
        if let Some(want) = self.distinct {
            match value.as_array() {
                Some(items) => {
                    let unique = items.iter().enumerate().all(|(i, v)| !items[..i].contains(v));
                    if unique != want {
                        failures.push(format!("{path}: distinct expected {want}"));
                    }
                }
                None => failures.push(format!("{path}: not an array")),
            }
        }
        failures
    }
}

/// Runs a script against `runtime` through the API surface.
pub struct ScenarioRunner {
    runtime: Arc<Runtime>,
    client: Client,
}

impl ScenarioRunner {
    pub fn new(runtime: Arc<Runtime>) -> Self {
        Self {
            client: Client::local(runtime.clone()),
            runtime,
        }
    }

    /// `base_dir` anchors relative ingest paths.
    pub fn run(&self, script: &ScenarioScript, base_dir: &Path) -> ScenarioReport {
        let mut outputs: BTreeMap<String, Output> = BTreeMap::new();
        let mut rows = Vec::with_capacity(script.steps.len());
        for (index, step) in script.steps.iter().enumerate() {
            let (passed, detail) = self.step(step, base_dir, &mut outputs);
            rows.push(Row {
                index,
                id: step.id().to_string(),
                action: step.action(),
                passed,
                detail,
            });
        }
        ScenarioReport {
            name: script.name.clone(),
            rows,
            event_seq: self.runtime.event_seq(),
            digest: self.runtime.state_digest(),
        }
    }

    fn step(&self, step: &Step, base_dir: &Path, outputs: &mut BTreeMap<String, Output>) -> (bool, String) {
        let (output, expect_error) = match step {
            Step::Ingest {
                path,
                domain,
                expect_error,
                ..
            } => (self.ingest(&base_dir.join(path), domain.as_deref()), expect_error),
            Step::Query {
                session,
                pattern,
                text,
                persona,
                domain,
                expect_error,
                ..
            } => {
                let req = QueryRequest {
                    session_id: session.clone(),
                    text: text.clone(),
                    pattern: pattern.clone(),
                    persona: *persona,
                    domain: domain.clone(),
                };
                let out = match self.client.query(&req) {
                    Ok(reply) => Output::Query(reply.query_id),
                    Err(e) => Output::Failed(e),
                };
                (out, expect_error)
            }
            Step::Decide {
                review,
                status,
                note,
                replacement_text,
                expect_error,
                ..
            } => (
                self.decide(outputs.get(review), status, note, replacement_text),
                expect_error,
            ),
            Step::Assert {
                step: target, checks, ..
            } => {
                let (passed, detail) = self.assert(outputs.get(target), checks);
                return (passed, detail);
            }
        };
        let result = match (&output, expect_error) {
            (Output::Failed(e), Some(want)) if &e.error == want => (true, format!("error {} as expected", e.error)),
            (Output::Failed(e), _) => (false, format!("error {}: {}", e.error, e.message)),
            (_, Some(want)) => (false, format!("expected error {want}, got success")),
            (out, None) => (true, self.describe(out)),
        };
        outputs.insert(step.id().to_string(), output);
        result
    }

    fn ingest(&self, path: &Path, domain: Option<&str>) -> Output {
        let body = match std::fs::read_to_string(path) {
            Ok(b) => b,
            Err(e) => return Output::Failed(ApiError::new(400, "Io", format!("{}: {e}", path.display()))),
        };
        let reply = match domain {
            Some(d) => self.client.ingest_documents(d, &body),
            None => self.client.ingest_triples(&body),
        };
        match reply {
            Ok(r) => Output::Ingested(r.upserted),
            Err(e) => Output::Failed(e),
        }
    }

    fn decide(
        &self,
        target: Option<&Output>,
        status: &str,
        note: &Option<String>,
        replacement_text: &Option<String>,
    ) -> Output {
        let query_id = match target {
            Some(Output::Query(q)) => q,
            _ => return Output::Failed(ApiError::new(400, "NoReview", "referenced step produced no query")),
        };
        let review_id = match self.client.get_query(query_id) {
            Ok(view) => match view.record.review_id {
                Some(r) => r,
                None => return Output::Failed(ApiError::new(400, "NoReview", format!("{query_id} has no review"))),
            },
            Err(e) => return Output::Failed(e),
        };
        let req = DecisionRequest {
            status: status.into(),
            note: note.clone(),
            replacement_text: replacement_text.clone(),
        };
        match self.client.decide(&review_id, &req) {
            Ok(item) => Output::Review(item.review_id),
            Err(e) => Output::Failed(e),
        }
    }

    fn describe(&self, out: &Output) -> String {
        match out {
            Output::Ingested(n) => format!("upserted: {n}"),
            Output::Query(q) => match self.client.get_query(q) {
                Ok(view) => match view.record.status {
                    QueryStatus::Delivered => format!("{q} delivered"),
                    QueryStatus::PendingReview => {
                        format!("{q} pending-review {}", view.record.review_id.unwrap_or_default())
                    }
                },
                Err(e) => format!("{q} {}", e.error),
            },
            Output::Review(r) => match self.client.get_review(r) {
                Ok(item) => format!("{r} {}", item.status.as_str()),
                Err(e) => format!("{r} {}", e.error),
            },
            Output::Failed(e) => format!("error {}", e.error),
        }
    }

    /// The current API view of what a step produced.
    fn subject(&self, out: &Output) -> Result<Value, String> {
        let to_value = |v: Result<Value, serde_json::Error>| v.map_err(|e| e.to_string());
        match out {
            Output::Ingested(n) => Ok(serde_json::json!({ "upserted": n })),
            Output::Query(q) => {
                let view = self.client.get_query(q).map_err(|e| e.to_string())?;
                let review = match &view.record.review_id {
                    Some(r) => Some(self.client.get_review(r).map_err(|e| e.to_string())?),
                    None => None,
                };
                let mut value = to_value(serde_json::to_value(view))?;
                if let (Some(item), Value::Object(map)) = (review, &mut value) {
                    map.insert("review".into(), to_value(serde_json::to_value(item))?);
                }
                Ok(value)
            }
            Output::Review(r) => match self.client.get_review(r) {
                Ok(item) => to_value(serde_json::to_value(item)),
                Err(e) => Err(e.to_string()),
            },
            Output::Failed(e) => to_value(serde_json::to_value(e)),
        }
    }

    fn assert(&self, target: Option<&Output>, checks: &[Check]) -> (bool, String) {
        let Some(out) = target else {
            return (false, "referenced step has no output".into());
        };
        let subject = match self.subject(out) {
            Ok(v) => v,
            Err(e) => return (false, e),
        };
        let failures: Vec<String> = checks.iter().flat_map(|c| c.evaluate(&subject)).collect();
        if failures.is_empty() {
            (
                true,
                format!("{} check{}", checks.len(), if checks.len() == 1 { "" } else { "s" }),
            )
        } else {
            (false, failures.join("; "))
        }
    }
}
