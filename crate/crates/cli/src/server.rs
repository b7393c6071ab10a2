//! Wire protocol v1 over HTTP, plus a websocket channel for chat.
//!
//! Payloads are documented in `schema/wire-v1.json`. Unknown request fields
//! are ignored.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use convxai_core::dialogue::{DialogueError, DialogueResponse};
use convxai_core::service::{LogEntry, Service, ServiceError};

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    available: Option<Vec<String>>,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, code: "bad_request", message: message.into(), available: None }
    }

    fn body(&self) -> serde_json::Value {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(a) = &self.available {
            error["available"] = json!(a);
        }
        json!({ "error": error })
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let message = e.to_string();
        let (status, code, available) = match e {
            ServiceError::UnknownConference { available, .. } => {
                (StatusCode::NOT_FOUND, "unknown_conference", Some(available))
            }
            ServiceError::UnknownSession => (StatusCode::UNAUTHORIZED, "unknown_session", None),
            ServiceError::EmptyAbstract => (StatusCode::UNPROCESSABLE_ENTITY, "empty_abstract", None),
            ServiceError::AbstractTooLong { .. } => (StatusCode::PAYLOAD_TOO_LARGE, "abstract_too_long", None),
            ServiceError::Dialogue(DialogueError::EmptyUtterance) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "empty_utterance", None)
            }
            ServiceError::Dialogue(DialogueError::NoDocument) => (StatusCode::CONFLICT, "no_document", None),
            ServiceError::Dialogue(DialogueError::SentenceOutOfRange { .. }) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "sentence_out_of_range", None)
            }
            ServiceError::Analysis(_) | ServiceError::Log { .. } | ServiceError::Corrupt { .. } => {
                tracing::error!(error = %message, "request failed");
                (StatusCode::INTERNAL_SERVER_ERROR, "internal", None)
            }
        };
        Self { status, code, message, available }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

#[derive(Deserialize)]
pub struct CreateSession {
    pub conference: String,
}

#[derive(Deserialize)]
pub struct SubmitAbstract {
    pub text: String,
}

#[derive(Deserialize)]
pub struct SelectSentence {
    pub sentence_index: usize,
    #[serde(default)]
    pub revision: Option<u64>,
}

#[derive(Deserialize)]
pub struct Chat {
    pub utterance: String,
}

#[derive(Deserialize)]
pub struct UsageQuery {
    #[serde(default)]
    pub session: Option<String>,
}

#[derive(Serialize)]
pub struct SessionLog {
    pub session_id: String,
    pub events: Vec<LogEntry>,
}

/// Messages a websocket client sends.
#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamRequest {
    Chat { utterance: String },
    Select { sentence_index: usize, #[serde(default)] revision: Option<u64> },
}

type AppState = Arc<Service>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

/// Runs service work off the async executor; the session lock keeps
/// per-session order.
async fn blocking<T, F>(service: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    let service = service.clone();
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal",
            message: e.to_string(),
            available: None,
        })?
        .map_err(ApiError::from)
}

async fn health(State(service): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "wire_version": WIRE_VERSION, "conferences": service.conferences() }))
}

async fn create_session(
    State(service): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(payload)?;
    let info = blocking(&service, move |s| s.create_session(&req.conference)).await?;
    Ok((StatusCode::CREATED, Json(info)))
}

async fn submit(
    State(service): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<SubmitAbstract>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(payload)?;
    Ok(Json(blocking(&service, move |s| s.submit_abstract(&id, &req.text)).await?))
}

async fn select(
    State(service): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<SelectSentence>, JsonRejection>,
) -> Result<Json<DialogueResponse>, ApiError> {
    let req = body(payload)?;
    Ok(Json(blocking(&service, move |s| s.select_sentence(&id, req.sentence_index, req.revision)).await?))
}

async fn chat(
    State(service): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<Chat>, JsonRejection>,
) -> Result<Json<DialogueResponse>, ApiError> {
    let req = body(payload)?;
    Ok(Json(blocking(&service, move |s| s.post_chat(&id, &req.utterance)).await?))
}

async fn session_log(State(service): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionLog>, ApiError> {
    let session_id = id.clone();
    let events = blocking(&service, move |s| s.session_log(&id)).await?;
    Ok(Json(SessionLog { session_id, events }))
}

async fn usage(State(service): State<AppState>, Query(q): Query<UsageQuery>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(&service, move |s| s.usage_stats(q.session.as_deref())).await?))
}

async fn stream(
    State(service): State<AppState>,
    Path(id): Path<String>,
    upgrade: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    // refuse the upgrade for unknown tokens
    let check = id.clone();
    blocking(&service, move |s| s.session_state(&check).map(|_| ())).await?;
    Ok(upgrade.on_upgrade(move |socket| run_stream(socket, service, id)))
}

async fn run_stream(mut socket: WebSocket, service: AppState, id: String) {
    while let Some(Ok(msg)) = socket.recv().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = match serde_json::from_str::<StreamRequest>(&text) {
            Err(e) => ApiError::bad_request(e.to_string()).body(),
            Ok(req) => {
                let id = id.clone();
                let result = blocking(&service, move |s| match req {
                    StreamRequest::Chat { utterance } => s.post_chat(&id, &utterance),
                    StreamRequest::Select { sentence_index, revision } => s.select_sentence(&id, sentence_index, revision),
                })
                .await;
                match result {
                    Ok(r) => json!({ "type": "response", "response": r }),
                    Err(e) => e.body(),
                }
            }
        };
        if socket.send(Message::Text(reply.to_string().into())).await.is_err() {
            break;
        }
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/abstract", post(submit))
        .route("/v1/sessions/{id}/select", post(select))
        .route("/v1/sessions/{id}/chat", post(chat))
        .route("/v1/sessions/{id}/log", get(session_log))
        .route("/v1/sessions/{id}/stream", get(stream))
        .route("/v1/usage", get(usage))
        .with_state(service)
}
