//! Tools: text embedding, domain vector databases, the knowledge graph, and
//! external search.

pub mod embed;
pub mod graph;
pub mod search;
pub mod vector;

pub use embed::{embed, Embedding, DIMENSION};
pub use graph::{parse_triples, Triple, TriplePattern, TripleStore, WILDCARD};
pub use search::{FixtureHit, SearchClient, SearchFixtures, SearchResult};
pub use vector::{parse_corpus, Document, DomainStore, ScoredDocument, StoredDocument, VectorStores};

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("content is empty")]
    EmptyContent,
    #[error("field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("line {line}: {reason}")]
    InvalidLine { line: usize, reason: String },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
}
