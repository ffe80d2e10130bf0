//! Completion backends.
//!
//! [`ScriptedBackend`] is a pure function of its rule table and the prompt,
//! so every pipeline runs offline and byte-reproducibly. [`RemoteBackend`]
//! speaks the chat-completion wire protocol over HTTP.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::persona::Persona;
use super::template::substitute;
use super::ReasoningError;

/// Environment variable holding the bearer token for the remote backend.
pub const TOKEN_ENV: &str = "VERTICORE_LLM_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub persona: Persona,
    /// Character budget for scripted output; `max_tokens` for remote calls.
    pub max_length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Complete,
    Truncated,
    Refused,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub backend_id: String,
    pub finish_reason: FinishReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendCapability {
    DeterministicScripted,
    RemoteHttp,
}

pub trait CompletionBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn capability(&self) -> BackendCapability;
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ReasoningError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub pattern: String,
    pub completion: String,
    #[serde(default)]
    pub refuse: bool,
}

impl Rule {
    pub fn new(pattern: impl Into<String>, completion: impl Into<String>) -> Self {
        Self {
            pattern: pattern.into(),
            completion: completion.into(),
            refuse: false,
        }
    }
}

/// Ordered rules. Order only matters for breaking length ties.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleTable {
    rules: Vec<Rule>,
}

impl RuleTable {
    pub fn new(rules: Vec<Rule>) -> Result<Self, ReasoningError> {
        if let Some(pos) = rules.iter().position(|r| r.pattern.is_empty()) {
            return Err(ReasoningError::InvalidRuleTable(format!(
                "rule {pos} has an empty pattern"
            )));
        }
        Ok(Self { rules })
    }

    pub fn from_json(text: &str) -> Result<Self, ReasoningError> {
        let rules: Vec<Rule> =
            serde_json::from_str(text).map_err(|e| ReasoningError::InvalidRuleTable(e.to_string()))?;
        Self::new(rules)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// The rule whose pattern is the longest substring of `prompt`; the
    /// earliest such rule on equal length.
    pub fn best_match(&self, prompt: &str) -> Option<&Rule> {
        let mut best: Option<(&Rule, usize)> = None;
        for rule in &self.rules {
            if !prompt.contains(&rule.pattern) {
                continue;
            }
            let len = rule.pattern.chars().count();
            if best.is_none_or(|(_, l)| len > l) {
                best = Some((rule, len));
            }
        }
        best.map(|(r, _)| r)
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    id: String,
    rules: RuleTable,
}

impl ScriptedBackend {
    pub fn new(rules: RuleTable) -> Self {
        Self {
            id: "scripted".into(),
            rules,
        }
    }

    pub fn rules(&self) -> &RuleTable {
        &self.rules
    }
}

/// Truncates to `max` characters.
fn clip(text: String, max: usize) -> (String, bool) {
    match text.char_indices().nth(max) {
        Some((byte_idx, _)) => (text[..byte_idx].to_string(), true),
        None => (text, false),
    }
}

impl CompletionBackend for ScriptedBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn capability(&self) -> BackendCapability {
        BackendCapability::DeterministicScripted
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ReasoningError> {
        let prompt = &request.prompt;
        if prompt.trim().is_empty() {
            return Err(ReasoningError::EmptyPrompt);
        }
        let (raw, refused) = match self.rules.best_match(prompt) {
            Some(rule) => {
                let line = prompt
                    .lines()
                    .find(|l| l.contains(&rule.pattern))
                    .unwrap_or(rule.pattern.as_str());
                let rest = line
                    .find(&rule.pattern)
                    .map(|at| line[at + rule.pattern.len()..].trim())
                    .unwrap_or_default();
                // Unknown `{...}` names in a completion stay literal.
                let text = substitute(&rule.completion, |name| match name {
                    "match" => Some(rule.pattern.as_str()),
                    "line" => Some(line),
                    "rest" => Some(rest),
                    _ => None,
                })
                .unwrap_or_else(|_| {
                    rule.completion
                        .replace("{match}", &rule.pattern)
                        .replace("{line}", line)
                        .replace("{rest}", rest)
                });
                (text, rule.refuse)
            }
            None => (format!("ECHO: {}", prompt.lines().last().unwrap_or_default()), false),
        };
        let (text, truncated) = clip(raw, request.max_length);
        let finish_reason = if refused {
            FinishReason::Refused
        } else if truncated {
            FinishReason::Truncated
        } else {
            FinishReason::Complete
        };
        Ok(CompletionResult {
            text,
            backend_id: self.id.clone(),
            finish_reason,
        })
    }
}

/// Counting semaphore bounding in-flight remote calls.
#[derive(Debug)]
struct InFlight {
    available: Mutex<usize>,
    cv: Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            available: Mutex::new(limit.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.available.lock().expect("in-flight lock");
        while *n == 0 {
            n = self.cv.wait(n).expect("in-flight lock");
        }
        *n -= 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("in-flight lock") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct RemoteSettings {
    pub url: String,
    pub model: String,
    pub token: Option<String>,
    pub max_retries: u32,
    pub timeout: Duration,
    pub max_in_flight: usize,
}

#[derive(Debug)]
pub struct RemoteBackend {
    settings: RemoteSettings,
    client: reqwest::blocking::Client,
    in_flight: InFlight,
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

pub(crate) fn map_finish_reason(remote: Option<&str>) -> FinishReason {
    match remote {
        Some("length") => FinishReason::Truncated,
        Some("content_filter") | Some("refusal") => FinishReason::Refused,
        _ => FinishReason::Complete,
    }
}

impl RemoteBackend {
    pub fn new(settings: RemoteSettings) -> Result<Self, ReasoningError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| ReasoningError::BackendUnavailable(e.to_string()))?;
        let in_flight = InFlight::new(settings.max_in_flight);
        Ok(Self {
            settings,
            client,
            in_flight,
        })
    }

    /// The JSON body sent for `request`.
    pub fn request_body(&self, request: &CompletionRequest) -> serde_json::Value {
        json!({
            "model": self.settings.model,
            "messages": [
                {"role": "system", "content": request.persona.directives.join(" ")},
                {"role": "user", "content": request.prompt},
            ],
            "max_tokens": request.max_length,
        })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<ChatReply, String> {
        let mut req = self.client.post(&self.settings.url).json(body);
        if let Some(token) = &self.settings.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("remote returned {status}"));
        }
        resp.json::<ChatReply>().map_err(|e| e.to_string())
    }
}

impl CompletionBackend for RemoteBackend {
    fn backend_id(&self) -> &str {
        &self.settings.url
    }

    fn capability(&self) -> BackendCapability {
        BackendCapability::RemoteHttp
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ReasoningError> {
        if request.prompt.trim().is_empty() {
            return Err(ReasoningError::EmptyPrompt);
        }
        let body = self.request_body(request);
        let _slot = self.in_flight.acquire();
        let mut last_err = String::new();
        for _ in 0..=self.settings.max_retries {
            match self.attempt(&body) {
                Ok(reply) => {
                    let choice = reply
                        .choices
                        .into_iter()
                        .next()
                        .ok_or_else(|| ReasoningError::BackendUnavailable("reply has no choices".into()))?;
                    return Ok(CompletionResult {
                        text: choice.message.content.unwrap_or_default(),
                        backend_id: self.settings.url.clone(),
                        finish_reason: map_finish_reason(choice.finish_reason.as_deref()),
                    });
                }
                Err(e) => last_err = e,
            }
        }
        Err(ReasoningError::BackendUnavailable(last_err))
    }
}
