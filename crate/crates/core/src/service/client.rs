//! One client interface over the API, either in-process or over HTTP.

use std::sync::Arc;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::api::{ApiError, DecisionRequest, Health, IngestReply, QueryReply, QueryRequest, QueryView, ReviewSummary};
use super::runtime::Runtime;
use crate::hitl::ReviewItem;

pub enum Client {
    Local(Arc<Runtime>),
    Remote {
        base_url: String,
        http: reqwest::blocking::Client,
    },
}

fn unreachable(e: reqwest::Error) -> ApiError {
    ApiError::new(503, "Unreachable", e.to_string())
}

impl Client {
    pub fn local(runtime: Arc<Runtime>) -> Self {
        Self::Local(runtime)
    }

    pub fn remote(base_url: &str) -> Result<Self, ApiError> {
        let base_url = if base_url.starts_with("http://") || base_url.starts_with("https://") {
            base_url.trim_end_matches('/').to_string()
        } else {
            format!("http://{}", base_url.trim_end_matches('/'))
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(unreachable)?;
        Ok(Self::Remote { base_url, http })
    }

    fn finish<T: DeserializeOwned>(resp: reqwest::blocking::Response) -> Result<T, ApiError> {
        let status = resp.status();
        let bytes = resp.bytes().map_err(unreachable)?;
        if status.is_success() {
            return serde_json::from_slice(&bytes).map_err(|e| ApiError::new(502, "BadReply", e.to_string()));
        }
        Err(serde_json::from_slice(&bytes).unwrap_or_else(|_| {
            ApiError::new(
                status.as_u16(),
                "HttpError",
                String::from_utf8_lossy(&bytes).into_owned(),
            )
        }))
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ApiError> {
        let Self::Remote { base_url, http } = self else {
            unreachable!("remote only")
        };
        Self::finish(http.get(format!("{base_url}{path}")).send().map_err(unreachable)?)
    }

    fn post_json<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ApiError> {
        let Self::Remote { base_url, http } = self else {
            unreachable!("remote only")
        };
        Self::finish(
            http.post(format!("{base_url}{path}"))
                .json(body)
                .send()
                .map_err(unreachable)?,
        )
    }

    fn post_text<T: DeserializeOwned>(&self, path: &str, body: &str) -> Result<T, ApiError> {
        let Self::Remote { base_url, http } = self else {
            unreachable!("remote only")
        };
        Self::finish(
            http.post(format!("{base_url}{path}"))
                .header("content-type", "application/x-ndjson")
                .body(body.to_string())
                .send()
                .map_err(unreachable)?,
        )
    }

    pub fn health(&self) -> Result<Health, ApiError> {
        match self {
            Self::Local(rt) => Ok(rt.api_health()),
            Self::Remote { .. } => self.get("/v1/health"),
        }
    }

    pub fn query(&self, req: &QueryRequest) -> Result<QueryReply, ApiError> {
        match self {
            Self::Local(rt) => rt.api_query(req.clone()),
            Self::Remote { .. } => self.post_json("/v1/queries", req),
        }
    }

    pub fn get_query(&self, query_id: &str) -> Result<QueryView, ApiError> {
        match self {
            Self::Local(rt) => rt.api_get_query(query_id),
            Self::Remote { .. } => self.get(&format!("/v1/queries/{query_id}")),
        }
    }

    pub fn list_reviews(&self, status: Option<&str>) -> Result<Vec<ReviewSummary>, ApiError> {
        match self {
            Self::Local(rt) => rt.api_list_reviews(status),
            Self::Remote { .. } => match status {
                Some(s) => self.get(&format!("/v1/reviews?status={s}")),
                None => self.get("/v1/reviews"),
            },
        }
    }

    pub fn get_review(&self, review_id: &str) -> Result<ReviewItem, ApiError> {
        match self {
            Self::Local(rt) => rt.api_get_review(review_id),
            Self::Remote { .. } => self.get(&format!("/v1/reviews/{review_id}")),
        }
    }

    pub fn decide(&self, review_id: &str, req: &DecisionRequest) -> Result<ReviewItem, ApiError> {
        match self {
            Self::Local(rt) => rt.api_decide(review_id, req.clone()),
            Self::Remote { .. } => self.post_json(&format!("/v1/reviews/{review_id}/decision"), req),
        }
    }

    pub fn ingest_documents(&self, domain: &str, jsonl: &str) -> Result<IngestReply, ApiError> {
        match self {
            Self::Local(rt) => rt.api_ingest_documents(domain, jsonl),
            Self::Remote { .. } => self.post_text(&format!("/v1/corpus/{domain}/documents"), jsonl),
        }
    }

    pub fn ingest_triples(&self, jsonl: &str) -> Result<IngestReply, ApiError> {
        match self {
            Self::Local(rt) => rt.api_ingest_triples(jsonl),
            Self::Remote { .. } => self.post_text("/v1/kg/triples", jsonl),
        }
    }
}
