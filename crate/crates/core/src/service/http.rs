//! The HTTP surface. Handlers parse bodies themselves so every malformed
//! body is a 400, then run the blocking pipeline work off the async workers.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::api::{parse_body, ApiError};
use super::runtime::Runtime;

type Shared = Arc<Runtime>;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

async fn blocking<T, F>(rt: Shared, f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Runtime) -> Result<T, ApiError> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&rt)).await {
        Ok(Ok(value)) => (StatusCode::OK, Json(value)).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(join) => ApiError::new(500, "Internal", join.to_string()).into_response(),
    }
}

fn utf8(body: &Bytes) -> Result<String, ApiError> {
    String::from_utf8(body.to_vec()).map_err(|e| ApiError::malformed(e.to_string()))
}

async fn health(State(rt): State<Shared>) -> Response {
    blocking(rt, |rt| Ok(rt.api_health())).await
}

async fn post_query(State(rt): State<Shared>, body: Bytes) -> Response {
    blocking(rt, move |rt| rt.api_query(parse_body(&body)?)).await
}

async fn get_query(State(rt): State<Shared>, Path(id): Path<String>) -> Response {
    blocking(rt, move |rt| rt.api_get_query(&id)).await
}

#[derive(Debug, Deserialize)]
struct ReviewFilter {
    status: Option<String>,
}

async fn list_reviews(State(rt): State<Shared>, Query(filter): Query<ReviewFilter>) -> Response {
    blocking(rt, move |rt| rt.api_list_reviews(filter.status.as_deref())).await
}

async fn get_review(State(rt): State<Shared>, Path(id): Path<String>) -> Response {
    blocking(rt, move |rt| rt.api_get_review(&id)).await
}

async fn post_decision(State(rt): State<Shared>, Path(id): Path<String>, body: Bytes) -> Response {
    blocking(rt, move |rt| rt.api_decide(&id, parse_body(&body)?)).await
}

async fn post_documents(State(rt): State<Shared>, Path(domain): Path<String>, body: Bytes) -> Response {
    blocking(rt, move |rt| rt.api_ingest_documents(&domain, &utf8(&body)?)).await
}

async fn post_triples(State(rt): State<Shared>, body: Bytes) -> Response {
    blocking(rt, move |rt| rt.api_ingest_triples(&utf8(&body)?)).await
}

async fn fallback() -> Response {
    ApiError::not_found("no such endpoint").into_response()
}

pub fn router(runtime: Arc<Runtime>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/queries", post(post_query))
        .route("/v1/queries/{query_id}", get(get_query))
        .route("/v1/reviews", get(list_reviews))
        .route("/v1/reviews/{review_id}", get(get_review))
        .route("/v1/reviews/{review_id}/decision", post(post_decision))
        .route("/v1/corpus/{domain}/documents", post(post_documents))
        .route("/v1/kg/triples", post(post_triples))
        .fallback(fallback)
        .with_state(runtime)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve_with_shutdown(
    runtime: Arc<Runtime>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(runtime))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Serves on `addr` until interrupted.
pub async fn serve(runtime: Arc<Runtime>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_with_shutdown(runtime, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
