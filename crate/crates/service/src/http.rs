//! HTTP routes. Every body is JSON; successful responses are canonical bytes
//! so equal (revision, query) pairs give equal responses.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use ege_core::editor::EditOp;
use ege_core::formats::to_canonical;
use ege_core::layout::ExpansionState;
use ege_core::matcher::DEFAULT_TAU;
use ege_core::{Code, Diagnostic, Diagnostics};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::session::ViewFilters;
use crate::store::SessionStore;

type Shared = Arc<SessionStore>;

/// Error response: `{"errors": [{code, severity, subject, message}, ...]}`.
#[derive(Debug)]
pub struct ApiError(pub Diagnostics);

impl From<Diagnostics> for ApiError {
    fn from(d: Diagnostics) -> Self {
        Self(d)
    }
}

impl From<Diagnostic> for ApiError {
    fn from(d: Diagnostic) -> Self {
        Self(Diagnostics::single(d))
    }
}

pub fn status_for(d: &Diagnostics) -> StatusCode {
    match d.errors().next().map(|e| e.code) {
        Some(Code::UnknownSession | Code::RefMissing) => StatusCode::NOT_FOUND,
        Some(Code::Syntax) => StatusCode::BAD_REQUEST,
        Some(Code::AtBoundary) => StatusCode::CONFLICT,
        Some(Code::Io) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    errors: &'a Diagnostics,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = to_canonical(&ErrorBody { errors: &self.0 });
        (
            status_for(&self.0),
            [(header::CONTENT_TYPE, "application/json")],
            body,
        )
            .into_response()
    }
}

fn json<T: Serialize>(value: &T) -> Response {
    (
        [(header::CONTENT_TYPE, "application/json")],
        to_canonical(value),
    )
        .into_response()
}

type ApiResult = Result<Response, ApiError>;

fn syntax(e: serde_json::Error) -> ApiError {
    Diagnostic::error(
        Code::Syntax,
        format!("line {} column {}", e.line(), e.column()),
        e.to_string(),
    )
    .into()
}

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(summary))
        .route("/sessions/{id}/graph", get(graph))
        .route("/sessions/{id}/events/{eid}", get(event))
        .route("/sessions/{id}/entities", get(entities))
        .route("/sessions/{id}/provenance/{pid}", get(provenance))
        .route("/sessions/{id}/provenance/{pid}/context", get(context))
        .route("/sessions/{id}/documents/{doc}", get(document))
        .route("/sessions/{id}/filter/entity/{entity}", get(filter_entity))
        .route("/sessions/{id}/filter/confidence", get(filter_confidence))
        .route("/sessions/{id}/edits", post(edits))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/redo", post(redo))
        .route("/sessions/{id}/export", get(export))
        .with_state(store)
}

/// Serves `store` on `addr` until the process ends.
pub async fn serve(store: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store)).await
}

#[derive(Deserialize)]
struct CreateBody {
    schema: Value,
    instance: Value,
    corpus: Value,
    #[serde(default)]
    tau: Option<f64>,
}

async fn create(State(store): State<Shared>, body: Bytes) -> ApiResult {
    let body: CreateBody = serde_json::from_slice(&body).map_err(syntax)?;
    let bytes = |v: &Value| serde_json::to_vec(v).expect("values serialize");
    let summary = store.create(
        &bytes(&body.schema),
        &bytes(&body.instance),
        &bytes(&body.corpus),
        body.tau.unwrap_or(DEFAULT_TAU),
    )?;
    let mut resp = json(&summary);
    *resp.status_mut() = StatusCode::CREATED;
    Ok(resp)
}

async fn summary(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    Ok(json(&store.summary(&id)?))
}

fn parse_f64(q: &HashMap<String, String>, key: &str) -> Result<Option<f64>, ApiError> {
    q.get(key)
        .map(|v| {
            v.parse::<f64>().map_err(|_| {
                ApiError::from(Diagnostic::error(
                    Code::BadRange,
                    key,
                    format!("{v:?} is not a number"),
                ))
            })
        })
        .transpose()
}

fn range(q: &HashMap<String, String>) -> Result<Option<(f64, f64)>, ApiError> {
    match (parse_f64(q, "lo")?, parse_f64(q, "hi")?) {
        (None, None) => Ok(None),
        (Some(lo), Some(hi)) => Ok(Some((lo, hi))),
        _ => Err(Diagnostic::error(
            Code::BadRange,
            "confidence",
            "lo and hi must be given together",
        )
        .into()),
    }
}

/// Query: `expanded=a,b`, `entity=<id>`, `lo=<x>&hi=<y>`.
async fn graph(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let snap = store.snapshot(&id)?;
    let st = ExpansionState::new(
        q.get("expanded")
            .map(|s| {
                s.split(',')
                    .filter(|p| !p.is_empty())
                    .map(str::to_string)
                    .collect::<Vec<_>>()
            })
            .unwrap_or_default(),
    );
    let filters = ViewFilters {
        entity: q.get("entity").cloned(),
        confidence: range(&q)?,
    };
    Ok(json(&snap.view(&st, &filters)?))
}

async fn event(State(store): State<Shared>, Path((id, eid)): Path<(String, String)>) -> ApiResult {
    Ok(json(&store.snapshot(&id)?.event_info(&eid)?))
}

async fn entities(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    Ok(json(&store.snapshot(&id)?.entities()))
}

async fn provenance(
    State(store): State<Shared>,
    Path((id, pid)): Path<(String, String)>,
) -> ApiResult {
    Ok(json(&store.snapshot(&id)?.provenance(&pid)?))
}

async fn context(
    State(store): State<Shared>,
    Path((id, pid)): Path<(String, String)>,
) -> ApiResult {
    Ok(json(&store.snapshot(&id)?.context(&pid)?))
}

async fn document(
    State(store): State<Shared>,
    Path((id, doc)): Path<(String, String)>,
) -> ApiResult {
    Ok(json(&store.snapshot(&id)?.document(&doc)?))
}

async fn filter_entity(
    State(store): State<Shared>,
    Path((id, entity)): Path<(String, String)>,
) -> ApiResult {
    Ok(json(&store.snapshot(&id)?.filter_entity(&entity)?))
}

async fn filter_confidence(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let snap = store.snapshot(&id)?;
    let Some((lo, hi)) = range(&q)? else {
        return Err(
            Diagnostic::error(Code::BadRange, "confidence", "lo and hi are required").into(),
        );
    };
    Ok(json(&snap.filter_confidence(lo, hi)?))
}

/// Body: a JSON list of ops, or `{"ops": [...]}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum EditBody {
    Bare(Vec<EditOp>),
    Wrapped { ops: Vec<EditOp> },
}

async fn edits(State(store): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let ops = match serde_json::from_slice::<EditBody>(&body).map_err(syntax)? {
        EditBody::Bare(ops) | EditBody::Wrapped { ops } => ops,
    };
    Ok(json(&store.edits(&id, ops)?))
}

async fn undo(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    Ok(json(&store.undo(&id)?))
}

async fn redo(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    Ok(json(&store.redo(&id)?))
}

async fn export(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult {
    Ok((
        [(header::CONTENT_TYPE, "application/json")],
        store.export(&id)?,
    )
        .into_response())
}
