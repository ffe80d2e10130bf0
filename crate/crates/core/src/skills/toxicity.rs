//! Lexicon-based toxicity screening.

use serde::Deserialize;

use super::{FlagCategory, FlagSpan, SkillError};

/// Built-in lexicon used when no lexicon file is configured.
pub const DEFAULT_LEXICON: &str = include_str!("../../fixtures/toxicity.json");

/// Whole-word, case-insensitive lexicon. Words may not contain whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToxicityLexicon {
    // longest first, so the greedy scan prefers the longest word at a position
    words: Vec<Vec<char>>,
}

fn fold(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

impl ToxicityLexicon {
    pub fn new<I, S>(words: I) -> Result<Self, SkillError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out: Vec<Vec<char>> = Vec::new();
        for w in words {
            let w = w.as_ref();
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(SkillError::InvalidLexicon(format!("`{w}` is not a single word")));
            }
            let chars: Vec<char> = w.chars().map(fold).collect();
            if !out.contains(&chars) {
                out.push(chars);
            }
        }
        out.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        Ok(Self { words: out })
    }

    pub fn from_json(text: &str) -> Result<Self, SkillError> {
        #[derive(Deserialize)]
        #[serde(transparent)]
        struct Words(Vec<String>);
        let Words(words) = serde_json::from_str(text).map_err(|e| SkillError::InvalidLexicon(e.to_string()))?;
        Self::new(words)
    }

    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("built-in lexicon is valid")
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn detect(&self, text: &str) -> Vec<FlagSpan> {
        let chars: Vec<char> = text.chars().collect();
        let boundary = |i: usize| i >= chars.len() || !chars[i].is_alphanumeric();
        let mut spans = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let starts_word = i == 0 || boundary(i - 1);
            let hit = starts_word
                .then(|| {
                    self.words.iter().find(|w| {
                        let end = i + w.len();
                        end <= chars.len()
                            && chars[i..end].iter().zip(w.iter()).all(|(c, w)| fold(*c) == *w)
                            && boundary(end)
                    })
                })
                .flatten();
            match hit {
                Some(w) => {
                    let end = i + w.len();
                    spans.push(FlagSpan {
                        start: i,
                        end,
                        category: FlagCategory::Toxicity,
                        matched: chars[i..end].iter().collect(),
                    });
                    i = end;
                }
                None => i += 1,
            }
        }
        spans
    }
}
