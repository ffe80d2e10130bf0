//! Process host: configuration, the event log and replay, the runtime that
//! ties the patterns together, and the HTTP API.

pub mod api;
pub mod client;
pub mod config;
pub mod events;
pub mod http;
pub mod runtime;
pub mod state;

pub use api::{ApiError, DecisionRequest, Health, IngestReply, QueryReply, QueryRequest, QueryView, ReviewSummary};
pub use client::Client;
pub use config::{Config, ConfigError};
pub use events::{read_log, EventKind, EventRecord};
pub use runtime::{replay, Runtime, RuntimeBuilder, Settings};
pub use state::{Event, QueryRecord, QueryStatus, State};
