//! The skill hub. Descriptors are append-only; each implemented skill carries
//! a handler, stubs answer [`SkillError::NotImplemented`].

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Guardrail, SkillError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillStatus {
    Implemented,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillDescriptor {
    pub name: String,
    pub version: String,
    pub capability: String,
    pub status: SkillStatus,
}

impl SkillDescriptor {
    pub fn new(name: &str, version: &str, capability: &str, status: SkillStatus) -> Self {
        Self {
            name: name.into(),
            version: version.into(),
            capability: capability.into(),
            status,
        }
    }
}

pub trait Skill: Send + Sync {
    fn invoke(&self, input: &str) -> Result<Value, SkillError>;
}

/// Full risk assessment as a skill.
impl Skill for Guardrail {
    fn invoke(&self, input: &str) -> Result<Value, SkillError> {
        Ok(serde_json::to_value(self.assess_risk(input)).expect("assessment serializes"))
    }
}

struct Entry {
    descriptor: SkillDescriptor,
    handler: Option<Arc<dyn Skill>>,
}

#[derive(Default)]
pub struct SkillRegistry {
    entries: BTreeMap<(String, String), Entry>,
}

impl std::fmt::Debug for SkillRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list()
            .entries(self.entries.values().map(|e| &e.descriptor))
            .finish()
    }
}

/// Handle returned by [`SkillRegistry::register`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillHandle {
    pub name: String,
    pub version: String,
}

impl SkillRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The guardrail classifier plus stub descriptors for skill families
    /// without an implementation.
    pub fn with_builtins(guardrail: Arc<Guardrail>) -> Self {
        let mut reg = Self::new();
        let implemented = SkillDescriptor::new("guardrail-risk", "1", "guardrail", SkillStatus::Implemented);
        reg.register_with(implemented, guardrail).expect("fresh registry");
        for (name, capability) in [
            ("ocr", "ocr"),
            ("image-classifier", "image-classification"),
            ("speech-transcriber", "audio"),
            ("bias-mitigation", "bias-mitigation"),
            ("misinformation-detector", "misinformation-detection"),
        ] {
            reg.register(SkillDescriptor::new(name, "0", capability, SkillStatus::Stub))
                .expect("fresh registry");
        }
        reg
    }

    pub fn register(&mut self, descriptor: SkillDescriptor) -> Result<SkillHandle, SkillError> {
        self.insert(descriptor, None)
    }

    pub fn register_with(
        &mut self,
        descriptor: SkillDescriptor,
        handler: Arc<dyn Skill>,
    ) -> Result<SkillHandle, SkillError> {
        self.insert(descriptor, Some(handler))
    }

    fn insert(
        &mut self,
        descriptor: SkillDescriptor,
        handler: Option<Arc<dyn Skill>>,
    ) -> Result<SkillHandle, SkillError> {
        let key = (descriptor.name.clone(), descriptor.version.clone());
        if self.entries.contains_key(&key) {
            return Err(SkillError::DuplicateSkill {
                name: key.0,
                version: key.1,
            });
        }
        self.entries.insert(key.clone(), Entry { descriptor, handler });
        Ok(SkillHandle {
            name: key.0,
            version: key.1,
        })
    }

    /// Sorted by name, then version.
    pub fn find_by_capability(&self, tag: &str) -> Vec<SkillDescriptor> {
        self.entries
            .values()
            .filter(|e| e.descriptor.capability == tag)
            .map(|e| e.descriptor.clone())
            .collect()
    }

    pub fn invoke(&self, name: &str, version: &str, input: &str) -> Result<Value, SkillError> {
        let entry = self
            .entries
            .get(&(name.to_string(), version.to_string()))
            .ok_or_else(|| SkillError::UnknownSkill {
                name: name.into(),
                version: version.into(),
            })?;
        match (&entry.handler, entry.descriptor.status) {
            (Some(h), SkillStatus::Implemented) => h.invoke(input),
            _ => Err(SkillError::NotImplemented(name.into())),
        }
    }
}
