//! Personas wrap a payload in tone-setting framing and closing text. The
//! payload itself is never rewritten.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ReasoningError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PersonaTag {
    Empathetic,
    Professional,
    Casual,
}

impl PersonaTag {
    pub const ALL: [PersonaTag; 3] = [Self::Empathetic, Self::Professional, Self::Casual];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Empathetic => "empathetic",
            Self::Professional => "professional",
            Self::Casual => "casual",
        }
    }
}

impl fmt::Display for PersonaTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PersonaTag {
    type Err = ReasoningError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "empathetic" => Ok(Self::Empathetic),
            "professional" => Ok(Self::Professional),
            "casual" => Ok(Self::Casual),
            other => Err(ReasoningError::InvalidPersona(other.to_string())),
        }
    }
}

/// The first directive opens the response; any further directives close it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub tag: PersonaTag,
    pub directives: Vec<String>,
}

impl Persona {
    pub fn new(tag: PersonaTag, directives: Vec<String>) -> Result<Self, ReasoningError> {
        if directives.is_empty() || directives.iter().any(|d| d.trim().is_empty()) {
            return Err(ReasoningError::InvalidPersona(format!(
                "{tag}: directives must be non-empty"
            )));
        }
        Ok(Self { tag, directives })
    }

    pub fn default_for(tag: PersonaTag) -> Self {
        let directives: &[&str] = match tag {
            PersonaTag::Empathetic => &[
                "I understand this matters to you, so here is what I found:",
                "Please reach out if anything here is unclear or worrying.",
            ],
            PersonaTag::Professional => &[
                "Summary of findings:",
                "This response is grounded in the sources listed in its provenance.",
            ],
            PersonaTag::Casual => &["Here's the scoop:", "Hope that helps!"],
        };
        Self {
            tag,
            directives: directives.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn framing(&self) -> String {
        format!("{}\n\n", self.directives[0])
    }

    pub fn closing(&self) -> String {
        if self.directives.len() > 1 {
            format!("\n\n{}", self.directives[1..].join(" "))
        } else {
            String::new()
        }
    }

    pub fn apply(&self, payload: &str) -> String {
        format!("{}{}{}", self.framing(), payload, self.closing())
    }

    /// Recovers the payload from a string produced by [`Persona::apply`].
    pub fn strip<'a>(&self, framed: &'a str) -> Option<&'a str> {
        framed
            .strip_prefix(self.framing().as_str())?
            .strip_suffix(self.closing().as_str())
    }
}

/// One persona per tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonaBook {
    personas: [Persona; 3],
}

impl Default for PersonaBook {
    fn default() -> Self {
        Self {
            personas: PersonaTag::ALL.map(Persona::default_for),
        }
    }
}

impl PersonaBook {
    pub fn set(&mut self, persona: Persona) {
        let idx = PersonaTag::ALL
            .iter()
            .position(|t| *t == persona.tag)
            .expect("tag in ALL");
        self.personas[idx] = persona;
    }

    pub fn get(&self, tag: PersonaTag) -> &Persona {
        self.personas.iter().find(|p| p.tag == tag).expect("every tag present")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_verbatim() {
        let p = Persona::default_for(PersonaTag::Professional);
        assert!(p.apply("P").contains("P"));
    }

    #[test]
    fn distinct_per_tag() {
        let book = PersonaBook::default();
        let outs: Vec<String> = PersonaTag::ALL.iter().map(|t| book.get(*t).apply("payload")).collect();
        assert_ne!(outs[0], outs[1]);
        assert_ne!(outs[1], outs[2]);
        assert_ne!(outs[0], outs[2]);
        assert!(outs.iter().all(|o| o.contains("payload")));
    }

    #[test]
    fn not_idempotent_but_strippable() {
        let p = Persona::default_for(PersonaTag::Casual);
        let once = p.apply("body");
        let twice = p.apply(&once);
        assert_ne!(once, twice);
        assert_eq!(p.strip(&twice), Some(once.as_str()));
        assert_eq!(p.strip(&once), Some("body"));
    }

    #[test]
    fn single_directive_has_no_closing() {
        let p = Persona::new(PersonaTag::Casual, vec!["Yo:".into()]).unwrap();
        assert_eq!(p.apply("x"), "Yo:\n\nx");
        assert!(Persona::new(PersonaTag::Casual, vec![]).is_err());
    }

    #[test]
    fn parse_tag() {
        assert_eq!("casual".parse::<PersonaTag>().unwrap(), PersonaTag::Casual);
        assert!("pirate".parse::<PersonaTag>().is_err());
    }
}
