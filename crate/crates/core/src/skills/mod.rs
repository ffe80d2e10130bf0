//! Cognitive skills: a registry of purpose-built inference capabilities, and
//! the guardrail classifiers that screen agent output.

pub mod pii;
pub mod registry;
pub mod toxicity;

use serde::{Deserialize, Serialize};

pub use pii::detect_pii;
pub use registry::{Skill, SkillDescriptor, SkillRegistry, SkillStatus};
pub use toxicity::ToxicityLexicon;

/// Default block threshold for [`RiskAssessment::score`].
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SkillError {
    #[error("skill {name}@{version} is already registered")]
    DuplicateSkill { name: String, version: String },
    #[error("no skill {name}@{version}")]
    UnknownSkill { name: String, version: String },
    #[error("skill `{0}` is not implemented")]
    NotImplemented(String),
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlagCategory {
    Toxicity,
    PiiEmail,
    PiiCard,
    PiiSsn,
}

/// A flagged region `[start, end)` in character offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagSpan {
    pub start: usize,
    pub end: usize,
    pub category: FlagCategory,
    pub matched: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Allow,
    Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub toxicity_count: usize,
    pub pii_count: usize,
    pub score: f64,
    pub spans: Vec<FlagSpan>,
    pub verdict: Verdict,
}

/// `min(1, 0.25 * toxicity + 0.5 * pii)`.
pub fn risk_score(toxicity_count: usize, pii_count: usize) -> f64 {
    (0.25 * toxicity_count as f64 + 0.5 * pii_count as f64).min(1.0)
}

pub fn verdict_for(score: f64, threshold: f64) -> Verdict {
    if score >= threshold {
        Verdict::Block
    } else {
        Verdict::Allow
    }
}

/// Toxicity and PII screening with a block threshold.
#[derive(Debug, Clone)]
pub struct Guardrail {
    lexicon: ToxicityLexicon,
    threshold: f64,
}

impl Default for Guardrail {
    fn default() -> Self {
        Self::new(ToxicityLexicon::builtin(), DEFAULT_THRESHOLD)
    }
}

impl Guardrail {
    pub fn new(lexicon: ToxicityLexicon, threshold: f64) -> Self {
        Self { lexicon, threshold }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn detect_toxicity(&self, text: &str) -> Vec<FlagSpan> {
        self.lexicon.detect(text)
    }

    pub fn detect_pii(&self, text: &str) -> Vec<FlagSpan> {
        detect_pii(text)
    }

    pub fn assess_risk(&self, text: &str) -> RiskAssessment {
        let toxic = self.detect_toxicity(text);
        let pii = self.detect_pii(text);
        let toxicity_count = toxic.len();
        let pii_count = pii.len();
        let score = risk_score(toxicity_count, pii_count);
        let mut spans = toxic;
        spans.extend(pii);
        spans.sort_by_key(|s| (s.start, s.category));
        RiskAssessment {
            toxicity_count,
            pii_count,
            score,
            spans,
            verdict: verdict_for(score, self.threshold),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn guard() -> Guardrail {
        Guardrail::new(ToxicityLexicon::new(["scam", "idiot"]).unwrap(), DEFAULT_THRESHOLD)
    }

    #[test]
    fn clean_text() {
        let r = guard().assess_risk("quarterly revenue rose");
        assert_eq!(r.score, 0.0);
        assert_eq!(r.verdict, Verdict::Allow);
    }

    #[test]
    fn one_email_blocks() {
        let r = guard().assess_risk("write to a@b.co");
        assert_eq!((r.toxicity_count, r.pii_count), (0, 1));
        assert_eq!(r.score, 0.5);
        assert_eq!(r.verdict, Verdict::Block);
    }

    #[test]
    fn capped_at_one() {
        let r = guard().assess_risk("scam idiot a@b.co");
        assert_eq!(r.score, 1.0);
        assert_eq!(r.verdict, Verdict::Block);
        assert_eq!(risk_score(10, 10), 1.0);
    }

    #[test]
    fn single_toxic_word_allowed_at_default() {
        let r = guard().assess_risk("what a scam");
        assert_eq!(r.score, 0.25);
        assert_eq!(r.verdict, Verdict::Allow);
    }

    #[test]
    fn verdict_threshold_edge() {
        assert_eq!(verdict_for(0.5, 0.5), Verdict::Block);
        assert_eq!(verdict_for(0.49, 0.5), Verdict::Allow);
        assert_eq!(verdict_for(0.0, 0.0), Verdict::Block);
    }
}
