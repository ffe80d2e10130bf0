//! Strict JSON configuration. Unknown keys are errors; absent optional keys
//! take defaults. Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::reasoning::PersonaTag;
use crate::skills::DEFAULT_THRESHOLD;

pub const DEFAULT_REFUSAL: &str = "I can't share that answer because it did not pass the content safety check.";
pub const DEFAULT_REJECTION: &str =
    "A domain expert reviewed this request and did not approve an automated answer. Please contact a specialist directly.";
pub const DEFAULT_FAILURE_MARKER: &str = "[subtask unavailable]";
pub const DEFAULT_NONE_MARKER: &str = "(none)";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Self::InvalidValue {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// The offending key, for [`ConfigError::InvalidValue`].
    pub fn key(&self) -> Option<&str> {
        match self {
            Self::InvalidValue { key, .. } => Some(key),
            Self::MissingFile(_) => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Directory of `<domain>.jsonl` corpora.
    pub corpus: Option<PathBuf>,
    /// Knowledge-graph triples, JSON Lines.
    pub kg: Option<PathBuf>,
    /// Directory of `<template-id>.txt` files overlaid on the built-ins.
    pub templates: Option<PathBuf>,
    /// Scripted backend rule table.
    pub rules: Option<PathBuf>,
    /// Capability lexicon for decomposition.
    pub lexicon: Option<PathBuf>,
    /// Toxicity word list.
    pub toxicity: Option<PathBuf>,
    pub search_fixtures: Option<PathBuf>,
    /// May not exist yet; its directory must.
    pub event_log: Option<PathBuf>,
    /// Directory of scenario scripts.
    pub scenarios: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuardrailConfig {
    pub threshold: f64,
}

impl Default for GuardrailConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RouterConfig {
    pub min_confidence: f64,
    pub refusal_text: String,
    /// Domains routed from startup, even before any document arrives.
    pub domains: Vec<String>,
    /// The domain the static workflow chain searches.
    pub chain_domain: Option<String>,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            min_confidence: 0.0,
            refusal_text: DEFAULT_REFUSAL.into(),
            domains: Vec::new(),
            chain_domain: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub url: Option<String>,
    pub model: String,
    pub max_retries: u32,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Scripted,
            url: None,
            model: "default".into(),
            max_retries: 2,
            timeout_ms: 30_000,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HitlConfig {
    pub rejection_text: String,
    /// How many prior feedback records a draft prompt includes.
    pub feedback_k: usize,
    /// Fills the feedback slot when there is none.
    pub none_marker: String,
}

impl Default for HitlConfig {
    fn default() -> Self {
        Self {
            rejection_text: DEFAULT_REJECTION.into(),
            feedback_k: 2,
            none_marker: DEFAULT_NONE_MARKER.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrchestratorConfig {
    pub failure_marker: String,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            failure_marker: DEFAULT_FAILURE_MARKER.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    #[default]
    Fixture,
    Live,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub mode: SearchMode,
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            mode: SearchMode::Fixture,
            endpoint: None,
            timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub listen: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: DEFAULT_LISTEN.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub paths: Paths,
    pub guardrail: GuardrailConfig,
    pub router: RouterConfig,
    pub retrieval_k: usize,
    /// Concurrent specialist agents per orchestrated query.
    pub parallelism: usize,
    pub backend: BackendConfig,
    pub hitl: HitlConfig,
    pub orchestrator: OrchestratorConfig,
    /// Directive lists overriding the built-in personas.
    pub personas: BTreeMap<PersonaTag, Vec<String>>,
    pub default_persona: PersonaTag,
    pub search: SearchConfig,
    /// Character budget for scripted completions, `max_tokens` for remote.
    pub max_length: usize,
    pub seed: u64,
    /// Synthesize log timestamps from the seed instead of the wall clock.
    pub deterministic: bool,
    /// Ingest the corpus directory and KG file at startup when the log is new.
    pub preload: bool,
    pub service: ServiceConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            guardrail: GuardrailConfig::default(),
            router: RouterConfig::default(),
            retrieval_k: 3,
            parallelism: 4,
            backend: BackendConfig::default(),
            hitl: HitlConfig::default(),
            orchestrator: OrchestratorConfig::default(),
            personas: BTreeMap::new(),
            default_persona: PersonaTag::Professional,
            search: SearchConfig::default(),
            max_length: 4000,
            seed: 0,
            deterministic: true,
            preload: false,
            service: ServiceConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// Turns a serde error message about an unknown field into that field's name.
fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|_| ConfigError::MissingFile(path.to_path_buf()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// Parses and validates `text`, resolving paths against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.inner().to_string();
            let key = match unknown_field(&message) {
                Some(field) if path == "." || path.is_empty() => field.to_string(),
                Some(field) if path.ends_with(field) => path,
                Some(field) => format!("{path}.{field}"),
                None => path,
            };
            ConfigError::invalid(&key, message)
        })?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn path(&self, selector: impl Fn(&Paths) -> &Option<PathBuf>) -> Option<PathBuf> {
        selector(&self.paths).as_deref().map(|p| self.resolve(p))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = self.guardrail.threshold;
        if !(0.0..=1.0).contains(&t) {
            return Err(ConfigError::invalid(
                "guardrail.threshold",
                format!("{t} is outside [0, 1]"),
            ));
        }
        let m = self.router.min_confidence;
        if !(-1.0..=1.0).contains(&m) {
            return Err(ConfigError::invalid(
                "router.min_confidence",
                format!("{m} is outside [-1, 1]"),
            ));
        }
        for (key, value) in [
            ("retrieval_k", self.retrieval_k),
            ("parallelism", self.parallelism),
            ("hitl.feedback_k", self.hitl.feedback_k),
            ("max_length", self.max_length),
            ("backend.max_in_flight", self.backend.max_in_flight),
        ] {
            if value < 1 {
                return Err(ConfigError::invalid(key, "must be at least 1"));
            }
        }
        for (key, value) in [
            ("router.refusal_text", &self.router.refusal_text),
            ("hitl.rejection_text", &self.hitl.rejection_text),
            ("hitl.none_marker", &self.hitl.none_marker),
            ("orchestrator.failure_marker", &self.orchestrator.failure_marker),
        ] {
            if value.trim().is_empty() {
                return Err(ConfigError::invalid(key, "must not be empty"));
            }
        }
        if self.router.domains.iter().any(|d| d.trim().is_empty()) {
            return Err(ConfigError::invalid("router.domains", "domain tags must not be empty"));
        }
        if self.router.chain_domain.as_deref().is_some_and(|d| d.trim().is_empty()) {
            return Err(ConfigError::invalid("router.chain_domain", "must not be empty"));
        }
        for (tag, directives) in &self.personas {
            if directives.is_empty() || directives.iter().any(|d| d.trim().is_empty()) {
                return Err(ConfigError::invalid(
                    &format!("personas.{tag}"),
                    "directives must be a non-empty list of non-empty strings",
                ));
            }
        }
        if self.backend.kind == BackendKind::Remote && self.backend.url.as_deref().is_none_or(str::is_empty) {
            return Err(ConfigError::invalid("backend.url", "required for the remote backend"));
        }
        if self.search.mode == SearchMode::Live && self.search.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(ConfigError::invalid("search.endpoint", "required for live search"));
        }
        if self.service.listen.parse::<SocketAddr>().is_err() {
            return Err(ConfigError::invalid("service.listen", "expected host:port"));
        }
        let must_exist = [
            self.path(|p| &p.corpus),
            self.path(|p| &p.kg),
            self.path(|p| &p.templates),
            self.path(|p| &p.rules),
            self.path(|p| &p.lexicon),
            self.path(|p| &p.toxicity),
            self.path(|p| &p.search_fixtures),
            self.path(|p| &p.scenarios),
        ];
        for path in must_exist.into_iter().flatten() {
            if !path.exists() {
                return Err(ConfigError::MissingFile(path));
            }
        }
        if let Some(log) = self.path(|p| &p.event_log) {
            let dir = log
                .parent()
                .filter(|d| !d.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            if !dir.is_dir() {
                return Err(ConfigError::MissingFile(dir.to_path_buf()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config, ConfigError> {
        Config::parse(text, Path::new("."))
    }

    #[test]
    fn minimal_gets_defaults() {
        let c = parse("{}").unwrap();
        assert_eq!(c.retrieval_k, 3);
        assert_eq!(c.guardrail.threshold, 0.5);
        assert_eq!(c.router.min_confidence, 0.0);
        assert_eq!(c.service.listen, "127.0.0.1:8080");
        assert_eq!(c.backend.kind, BackendKind::Scripted);
    }

    #[test]
    fn threshold_out_of_range() {
        let err = parse(r#"{"guardrail": {"threshold": 1.5}}"#).unwrap_err();
        assert_eq!(err.key(), Some("guardrail.threshold"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert_eq!(parse(r#"{"colour": 1}"#).unwrap_err().key(), Some("colour"));
        assert_eq!(
            parse(r#"{"guardrail": {"threshhold": 0.4}}"#).unwrap_err().key(),
            Some("guardrail.threshhold")
        );
    }

    #[test]
    fn wrong_type_names_key() {
        assert_eq!(
            parse(r#"{"retrieval_k": "three"}"#).unwrap_err().key(),
            Some("retrieval_k")
        );
        assert_eq!(parse(r#"{"retrieval_k": 0}"#).unwrap_err().key(), Some("retrieval_k"));
    }

    #[test]
    fn remote_needs_url() {
        let err = parse(r#"{"backend": {"kind": "remote"}}"#).unwrap_err();
        assert_eq!(err.key(), Some("backend.url"));
    }

    #[test]
    fn missing_referenced_file() {
        let err = parse(r#"{"paths": {"rules": "does/not/exist.json"}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::MissingFile(_)));
    }

    #[test]
    fn missing_config_file() {
        assert!(matches!(
            Config::load(Path::new("/nonexistent/config.json")),
            Err(ConfigError::MissingFile(_))
        ));
    }

    #[test]
    fn persona_overrides_parse() {
        let c = parse(r#"{"personas": {"casual": ["Yo!"]}}"#).unwrap();
        assert_eq!(c.personas[&PersonaTag::Casual], vec!["Yo!".to_string()]);
        assert!(parse(r#"{"personas": {"casual": []}}"#).is_err());
        assert!(parse(r#"{"personas": {"grumpy": ["x"]}}"#).is_err());
    }
}
