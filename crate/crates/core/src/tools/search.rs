//! External search client: canned fixtures by default, HTTP GET in live mode.

use std::fmt;
use std::time::Duration;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use super::ToolError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub title: String,
    pub snippet: String,
    pub source_url: String,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureHit {
    pub title: String,
    pub snippet: String,
    pub source_url: String,
}

/// Fixture table in file order. JSON object keys keep their written order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchFixtures {
    entries: Vec<(String, Vec<FixtureHit>)>,
}

impl SearchFixtures {
    pub fn new(entries: Vec<(String, Vec<FixtureHit>)>) -> Self {
        Self { entries }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    /// Hits for the first key (in file order) that occurs in `query`,
    /// compared case-insensitively.
    pub fn lookup(&self, query: &str) -> Vec<SearchResult> {
        let q = query.to_lowercase();
        self.entries
            .iter()
            .find(|(key, _)| q.contains(&key.to_lowercase()))
            .map(|(_, hits)| ranked(hits.clone()))
            .unwrap_or_default()
    }
}

fn ranked(hits: Vec<FixtureHit>) -> Vec<SearchResult> {
    hits.into_iter()
        .zip(1u32..)
        .map(|(h, rank)| SearchResult {
            title: h.title,
            snippet: h.snippet,
            source_url: h.source_url,
            rank,
        })
        .collect()
}

impl<'de> Deserialize<'de> for SearchFixtures {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct OrderedVisitor;
        impl<'de> Visitor<'de> for OrderedVisitor {
            type Value = SearchFixtures;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object mapping fixture keys to result lists")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Vec<FixtureHit>>()? {
                    entries.push((k, v));
                }
                Ok(SearchFixtures { entries })
            }
        }
        deserializer.deserialize_map(OrderedVisitor)
    }
}

#[derive(Debug)]
pub enum SearchClient {
    Fixture(SearchFixtures),
    Live {
        endpoint: String,
        client: reqwest::blocking::Client,
    },
}

impl SearchClient {
    pub fn fixtures(fixtures: SearchFixtures) -> Self {
        Self::Fixture(fixtures)
    }

    pub fn live(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, ToolError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ToolError::BackendUnavailable(e.to_string()))?;
        Ok(Self::Live {
            endpoint: endpoint.into(),
            client,
        })
    }

    pub fn web_search(&self, query: &str) -> Result<Vec<SearchResult>, ToolError> {
        if query.trim().is_empty() {
            return Err(ToolError::EmptyContent);
        }
        match self {
            Self::Fixture(f) => Ok(f.lookup(query)),
            Self::Live { endpoint, client } => {
                let url = reqwest::Url::parse_with_params(endpoint, &[("q", query)])
                    .map_err(|e| ToolError::BackendUnavailable(e.to_string()))?;
                let resp = client
                    .get(url)
                    .send()
                    .and_then(|r| r.error_for_status())
                    .map_err(|e| ToolError::BackendUnavailable(e.to_string()))?;
                let hits: Vec<FixtureHit> = resp.json().map_err(|e| ToolError::BackendUnavailable(e.to_string()))?;
                Ok(ranked(hits))
            }
        }
    }
}
