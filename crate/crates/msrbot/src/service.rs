use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use msrbot_core::dialogue::{Requirement, ReplyOutcome, INTENT_SPECS};
use msrbot_core::ner::Entity;
use msrbot_core::{Bot, NowClock, QueryResult};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

#[derive(Clone)]
pub struct AppState {
    bot: Arc<Bot>,
    fixed_now: Option<DateTime<Utc>>,
    failures: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(bot: Arc<Bot>, fixed_now: Option<DateTime<Utc>>) -> Self {
        AppState {
            bot,
            fixed_now,
            failures: Arc::new(AtomicU64::new(0)),
        }
    }

    fn clock(&self) -> NowClock {
        self.fixed_now.map(NowClock::fixed).unwrap_or_else(NowClock::system)
    }
}

#[derive(Debug, Deserialize)]
pub struct ChatRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    pub text: String,
}

#[derive(Debug, Serialize)]
pub struct ChatResponse {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub reply: String,
    pub intent: String,
    pub confidence: f64,
    pub outcome: ReplyOutcome,
    pub entities: Vec<Entity>,
    pub elapsed_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<QueryResult>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
}

fn error(status: StatusCode, message: impl Into<String>, id: Option<String>) -> Response {
    (
        status,
        Json(ErrorBody {
            error: message.into(),
            id,
        }),
    )
        .into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/chat", post(chat))
        .route("/health", get(health))
        .route("/intents", get(intents))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn chat(State(state): State<AppState>, body: Bytes) -> Response {
    let request: ChatRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid request body: {e}"), None),
    };
    if request.text.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "text must not be empty", None);
    }
    let clock = state.clock();
    let bot = state.bot.clone();
    let text = request.text;
    match tokio::task::spawn_blocking(move || bot.handle(&text, clock)).await {
        Ok(reply) => Json(ChatResponse {
            session_id: request.session_id,
            reply: reply.text,
            intent: reply.intent,
            confidence: reply.confidence,
            outcome: reply.outcome,
            entities: reply.entities,
            elapsed_ms: reply.elapsed_ms,
            payload: reply.payload,
        })
        .into_response(),
        Err(join_error) => {
            let n = state.failures.fetch_add(1, Ordering::Relaxed);
            let id = format!("{:x}-{n}", Utc::now().timestamp_millis());
            eprintln!("internal error {id}: {join_error}");
            error(StatusCode::INTERNAL_SERVER_ERROR, "internal error", Some(id))
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Health {
    pub status: String,
    pub commit_count: usize,
    pub issue_count: usize,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let kb = state.bot.engine().kb();
    Json(Health {
        status: "ok".into(),
        commit_count: kb.commit_count(),
        issue_count: kb.issue_count(),
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct IntentInfo {
    pub intent_id: String,
    pub description: String,
    pub example: String,
    pub required_entities: Vec<String>,
}

pub fn intent_catalog() -> Vec<IntentInfo> {
    INTENT_SPECS
        .iter()
        .map(|s| IntentInfo {
            intent_id: s.intent_id.to_string(),
            description: s.description.to_string(),
            example: s.example.to_string(),
            required_entities: s
                .required_entities
                .iter()
                .map(|r| match r {
                    Requirement::Entity(t) => t.name().to_string(),
                    Requirement::EitherOf(a, b) => format!("{}|{}", a.name(), b.name()),
                })
                .collect(),
        })
        .collect()
}

async fn intents() -> Json<Vec<IntentInfo>> {
    Json(intent_catalog())
}

/// Binds and serves until the process is stopped.
pub async fn serve(state: AppState, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("msrbot listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
