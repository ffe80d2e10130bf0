//! The reasoning engine: prompt templates, completion backends, query
//! decomposition, and personas.

pub mod backend;
pub mod decompose;
pub mod persona;
pub mod template;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use backend::{
    BackendCapability, CompletionBackend, CompletionRequest, CompletionResult, FinishReason, RemoteBackend,
    RemoteSettings, Rule, RuleTable, ScriptedBackend,
};
pub use decompose::{Capability, CapabilityLexicon, LexiconEntry, SubtaskDraft};
pub use persona::{Persona, PersonaBook, PersonaTag};
pub use template::{PromptTemplate, TemplateRegistry};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReasoningError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("missing template variable `{0}`")]
    MissingVariable(String),
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("query is empty")]
    EmptyQuery,
    #[error("completion backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("invalid rule table: {0}")]
    InvalidRuleTable(String),
    #[error("invalid persona: {0}")]
    InvalidPersona(String),
}

/// Templates, backend, lexicon and personas bundled for the pipelines.
#[derive(Clone)]
pub struct Reasoner {
    pub templates: TemplateRegistry,
    pub backend: Arc<dyn CompletionBackend>,
    pub lexicon: CapabilityLexicon,
    pub personas: PersonaBook,
    pub max_length: usize,
}

impl std::fmt::Debug for Reasoner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Reasoner")
            .field("backend", &self.backend.backend_id())
            .field("max_length", &self.max_length)
            .finish_non_exhaustive()
    }
}

impl Reasoner {
    pub fn scripted(rules: RuleTable) -> Self {
        Self {
            templates: TemplateRegistry::with_defaults(),
            backend: Arc::new(ScriptedBackend::new(rules)),
            lexicon: CapabilityLexicon::default(),
            personas: PersonaBook::default(),
            max_length: 4000,
        }
    }

    pub fn render(&self, template_id: &str, variables: &[(&str, &str)]) -> Result<String, ReasoningError> {
        let vars: BTreeMap<&str, &str> = variables.iter().copied().collect();
        self.templates.render(template_id, &vars)
    }

    pub fn complete(&self, prompt: &str, persona: PersonaTag) -> Result<CompletionResult, ReasoningError> {
        self.backend.complete(&CompletionRequest {
            prompt: prompt.to_string(),
            persona: self.personas.get(persona).clone(),
            max_length: self.max_length,
        })
    }

    /// Scripted backends split on conjunctions; remote backends are asked for
    /// a structured plan.
    pub fn decompose(&self, query: &str) -> Result<Vec<SubtaskDraft>, ReasoningError> {
        if query.trim().is_empty() {
            return Err(ReasoningError::EmptyQuery);
        }
        match self.backend.capability() {
            BackendCapability::DeterministicScripted => decompose::decompose_scripted(query, &self.lexicon),
            BackendCapability::RemoteHttp => {
                let prompt = self.render("decompose", &[("q", query)])?;
                let reply = self.complete(&prompt, PersonaTag::Professional)?;
                Ok(decompose::parse_remote_plan(&reply.text, query, &self.lexicon))
            }
        }
    }

    pub fn apply_persona(&self, payload: &str, persona: PersonaTag) -> String {
        self.personas.get(persona).apply(payload)
    }
}
