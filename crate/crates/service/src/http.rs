use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ddz_core::engine::Seat;
use serde::Deserialize;
use serde_json::json;
use uuid::Uuid;

use crate::session::{CreateSession, MoveRequest, Service, ServiceError};
use crate::store::RecordFilter;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let message = self.to_string();
        let (status, body) = match &self {
            ServiceError::InvalidConfig(_) => (
                StatusCode::BAD_REQUEST,
                json!({"error": "invalid_config", "message": message}),
            ),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, json!({"error": "not_found", "message": message})),
            ServiceError::Forbidden(_) => (StatusCode::FORBIDDEN, json!({"error": "forbidden", "message": message})),
            ServiceError::IllegalMove { reason, message } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": "illegal_move", "reason": reason, "message": message}),
            ),
            ServiceError::Conflict { current, .. } => (
                StatusCode::CONFLICT,
                json!({"error": "conflict", "version": current, "message": message}),
            ),
            ServiceError::Storage(_) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({"error": "storage", "message": message}),
            ),
        };
        (status, Json(body)).into_response()
    }
}

type Shared = State<Arc<Service>>;

#[derive(Deserialize)]
struct SeatQuery {
    seat: Seat,
}

#[derive(Deserialize)]
struct SinceQuery {
    since: Option<u64>,
}

#[derive(Deserialize)]
struct FormatQuery {
    format: Option<String>,
}

fn bad_id(id: &str) -> ServiceError {
    ServiceError::NotFound(format!("id {id:?}"))
}

async fn health() -> impl IntoResponse {
    Json(json!({"status": "ok"}))
}

async fn create(State(svc): Shared, Json(req): Json<CreateSession>) -> Result<impl IntoResponse, ServiceError> {
    Ok((StatusCode::CREATED, Json(svc.create_session(&req)?)))
}

async fn view(
    State(svc): Shared,
    Path(id): Path<String>,
    Query(q): Query<SeatQuery>,
) -> Result<impl IntoResponse, ServiceError> {
    let id = Uuid::parse_str(&id).map_err(|_| bad_id(&id))?;
    Ok(Json(svc.view(id, q.seat)?))
}

async fn version(
    State(svc): Shared,
    Path(id): Path<String>,
    Query(q): Query<SinceQuery>,
) -> Result<impl IntoResponse, ServiceError> {
    let id = Uuid::parse_str(&id).map_err(|_| bad_id(&id))?;
    Ok(Json(svc.version(id, q.since)?))
}

async fn play(
    State(svc): Shared,
    Path(id): Path<String>,
    Json(req): Json<MoveRequest>,
) -> Result<impl IntoResponse, ServiceError> {
    let id = Uuid::parse_str(&id).map_err(|_| bad_id(&id))?;
    Ok(Json(svc.post_move(id, &req)?))
}

async fn records(State(svc): Shared, Query(filter): Query<RecordFilter>) -> impl IntoResponse {
    Json(svc.list_records(&filter))
}

async fn record(
    State(svc): Shared,
    Path(id): Path<String>,
    Query(q): Query<FormatQuery>,
) -> Result<Response, ServiceError> {
    let id = Uuid::parse_str(&id).map_err(|_| bad_id(&id))?;
    let stored = svc.get_record(id)?;
    Ok(match q.format.as_deref() {
        Some("text") => (
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            stored.record.to_text(),
        )
            .into_response(),
        _ => Json(stored).into_response(),
    })
}

/// All endpoints; see `docs/api.md`.
pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create))
        .route("/sessions/{id}/view", get(view))
        .route("/sessions/{id}/version", get(version))
        .route("/sessions/{id}/moves", post(play))
        .route("/records", get(records))
        .route("/records/{id}", get(record))
        .with_state(service)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, service: Arc<Service>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
