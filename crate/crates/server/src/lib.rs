//! JSON-over-HTTP adapter for [`Engine`]. Handlers only decode the request,
//! call one engine operation on the blocking pool, and encode the result.

use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use draftsman_core::assembly::RenderFormat;
use draftsman_core::{Edit, Engine, Error, ErrorBody, GenericDocument, QueryFilter};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

pub const DEFAULT_ADDR: &str = "127.0.0.1:7878";

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody::new("bad_request", message),
        }
    }
}

/// HTTP status for each engine error.
pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::UnknownDocType(_) | Error::UnknownInstance(_) | Error::UnknownSession(_) => StatusCode::NOT_FOUND,
        Error::ViolationsOutstanding(_) => StatusCode::CONFLICT,
        Error::NotFound(_)
        | Error::NotAtomic(_)
        | Error::ValidationFailed(_)
        | Error::EditRejected(_)
        | Error::KindMismatch(_)
        | Error::UnboundPlaceholder(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::Parse(_) | Error::BadFilter(_) | Error::Invalid(_) => StatusCode::BAD_REQUEST,
        Error::FragmentUnreadable(_) | Error::Corrupt { .. } | Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError {
            status: status_for(&e),
            body: ErrorBody::from(&e),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone)]
struct AppState {
    engine: Arc<Engine>,
}

impl AppState {
    /// Runs one engine call off the async workers; store access is blocking.
    async fn run<T, F>(&self, f: F) -> ApiResult<T>
    where
        T: Send + 'static,
        F: FnOnce(&Engine) -> draftsman_core::Result<T> + Send + 'static,
    {
        let engine = self.engine.clone();
        match tokio::task::spawn_blocking(move || f(&engine)).await {
            Ok(r) => Ok(Json(r?)),
            Err(join) => Err(ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                body: ErrorBody::new("internal", join.to_string()),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewSession {
    pub doc_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RenderParams {
    #[serde(default = "text_format")]
    pub format: RenderFormat,
}

fn text_format() -> RenderFormat {
    RenderFormat::Text
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/generics", get(list_generics).post(import_generic))
        .route("/api/generics/validate", post(validate_generic))
        .route("/api/generics/{doc_type}", get(get_generic))
        .route("/api/sessions", get(list_sessions).post(start_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/edits", post(apply_edit))
        .route("/api/sessions/{id}/check", post(check_session))
        .route("/api/sessions/{id}/finalize", post(finalize))
        .route("/api/instances", get(query_instances))
        .route("/api/instances/{id}", get(get_instance))
        .route("/api/instances/{id}/render", get(render))
        .route("/api/fsck", get(fsck))
        .with_state(AppState { engine })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    engine: Arc<Engine>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(engine)).with_graceful_shutdown(shutdown).await
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into() })
}

async fn list_generics(State(s): State<AppState>) -> impl IntoResponse {
    s.run(|e| e.list_generics()).await
}

async fn get_generic(State(s): State<AppState>, Path(doc_type): Path<String>) -> impl IntoResponse {
    s.run(move |e| e.get_generic(&doc_type)).await
}

async fn import_generic(
    State(s): State<AppState>,
    body: Result<Json<GenericDocument>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Json(g) = body?;
    let report = s.run(move |e| e.import_generic(&g)).await?;
    Ok((StatusCode::CREATED, report))
}

async fn validate_generic(body: Result<Json<GenericDocument>, JsonRejection>) -> impl IntoResponse {
    let Json(g) = body?;
    Ok::<_, ApiError>(Json(draftsman_core::model::validate_generic(&g)))
}

async fn list_sessions(State(s): State<AppState>) -> impl IntoResponse {
    s.run(|e| e.list_sessions()).await
}

async fn start_session(
    State(s): State<AppState>,
    body: Result<Json<NewSession>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Json(req) = body?;
    let session = s.run(move |e| e.start_session(&req.doc_type, req.prefix.as_deref())).await?;
    Ok((StatusCode::CREATED, session))
}

async fn get_session(State(s): State<AppState>, Path(id): Path<String>) -> impl IntoResponse {
    s.run(move |e| e.get_session(&id)).await
}

async fn apply_edit(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Edit>, JsonRejection>,
) -> impl IntoResponse {
    let Json(edit) = body?;
    s.run(move |e| e.apply_edit(&id, edit)).await
}

async fn check_session(State(s): State<AppState>, Path(id): Path<String>) -> impl IntoResponse {
    s.run(move |e| e.check_session(&id)).await
}

async fn finalize(State(s): State<AppState>, Path(id): Path<String>) -> impl IntoResponse {
    s.run(move |e| e.finalize(&id)).await
}

async fn query_instances(
    State(s): State<AppState>,
    params: Result<Query<Vec<(String, String)>>, QueryRejection>,
) -> impl IntoResponse {
    let Query(params) = params?;
    let filter = QueryFilter::from_params(params)?;
    s.run(move |e| e.query(&filter)).await
}

async fn get_instance(State(s): State<AppState>, Path(id): Path<String>) -> impl IntoResponse {
    s.run(move |e| e.get_instance(&id)).await
}

async fn render(
    State(s): State<AppState>,
    Path(id): Path<String>,
    params: Result<Query<RenderParams>, QueryRejection>,
) -> impl IntoResponse {
    let Query(p) = params?;
    s.run(move |e| e.render(&id, p.format)).await
}

async fn fsck(State(s): State<AppState>) -> impl IntoResponse {
    s.run(|e| e.fsck()).await
}
