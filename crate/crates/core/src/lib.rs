//! Vertical AI agent runtime.
//!
//! Four agent modules (memory, reasoning, cognitive skills, tools) and three
//! agentic patterns built on them: a domain router over per-domain vector
//! stores, an orchestrator that fans subtasks out to specialist agents, and
//! a human-in-the-loop review workflow. All state changes are events in an
//! append-only log, so any run can be replayed exactly.

pub mod cli;
pub mod error;
pub mod hitl;
pub mod memory;
pub mod orchestrator;
pub mod reasoning;
pub mod response;
pub mod router;
pub mod scenario;
pub mod service;
pub mod skills;
pub mod tools;

pub use error::Error;
pub use reasoning::PersonaTag;
pub use response::{FinalResponse, Pattern};
pub use service::{Config, Runtime};
