//! The crate-wide error type.

use crate::hitl::HitlError;
use crate::memory::MemoryError;
use crate::reasoning::ReasoningError;
use crate::router::RouterError;
use crate::service::config::ConfigError;
use crate::skills::SkillError;
use crate::tools::ToolError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Reasoning(#[from] ReasoningError),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Hitl(#[from] HitlError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corrupt event log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("inconsistent event: {0}")]
    InvalidEvent(String),
    #[error("unknown query `{0}`")]
    UnknownQuery(String),
    #[error("event log i/o: {0}")]
    Io(#[from] std::io::Error),
}
