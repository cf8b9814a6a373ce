use crate::state::{ServiceConfig, ServiceError, ServiceState, VerdictInput};
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::Utc;
use labelflow_core::eval::AdjudicationError;
use serde_json::json;
use std::net::SocketAddr;
use std::sync::Arc;
use tokio::sync::RwLock;
use tower_http::cors::CorsLayer;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<RwLock<ServiceState>>,
    token: Option<Arc<str>>,
}

impl AppState {
    pub fn new(state: ServiceState, token: Option<String>) -> AppState {
        AppState {
            inner: Arc::new(RwLock::new(state)),
            token: token.map(Into::into),
        }
    }

    pub fn shared(&self) -> Arc<RwLock<ServiceState>> {
        self.inner.clone()
    }
}

struct ApiError(StatusCode, String, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1, "detail": self.2}))).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let detail = e.to_string();
        let (status, kind) = match &e {
            ServiceError::NoRunLoaded(_) => (StatusCode::NOT_FOUND, "no_run_loaded"),
            ServiceError::NoTranscript(_) => (StatusCode::NOT_FOUND, "no_transcript"),
            ServiceError::Adjudication(AdjudicationError::UnknownCase { .. }) => (StatusCode::NOT_FOUND, "unknown_case"),
            ServiceError::Adjudication(AdjudicationError::DuplicateVerdict { .. }) => {
                (StatusCode::CONFLICT, "duplicate_verdict")
            }
            ServiceError::Adjudication(AdjudicationError::VerdictForConcordantCase { .. }) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "verdict_for_concordant_case")
            }
            ServiceError::Log { .. } | ServiceError::Load(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        ApiError(status, kind.into(), detail)
    }
}

fn authorize(app: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let Some(token) = &app.token else {
        return Ok(());
    };
    let given = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if given == Some(token.as_ref()) {
        Ok(())
    } else {
        Err(ApiError(
            StatusCode::UNAUTHORIZED,
            "unauthorized".into(),
            "missing or wrong bearer token".into(),
        ))
    }
}

async fn discrepancies(
    State(app): State<AppState>,
    headers: HeaderMap,
    Path(run_id): Path<String>,
) -> Result<Response, ApiError> {
    authorize(&app, &headers)?;
    let s = app.inner.read().await;
    s.check_run(&run_id)?;
    Ok(Json(s.discrepancies()).into_response())
}

async fn post_verdict(
    State(app): State<AppState>,
    headers: HeaderMap,
    Path(run_id): Path<String>,
    Json(input): Json<VerdictInput>,
) -> Result<Response, ApiError> {
    authorize(&app, &headers)?;
    let mut s = app.inner.write().await;
    s.check_run(&run_id)?;
    let ack = s.post_verdict(input, Utc::now())?;
    Ok((StatusCode::CREATED, Json(ack)).into_response())
}

async fn metrics(
    State(app): State<AppState>,
    headers: HeaderMap,
    Path(run_id): Path<String>,
) -> Result<Response, ApiError> {
    authorize(&app, &headers)?;
    let s = app.inner.read().await;
    s.check_run(&run_id)?;
    Ok(Json(s.metrics()).into_response())
}

async fn transcript(
    State(app): State<AppState>,
    headers: HeaderMap,
    Path((run_id, patient_id)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    authorize(&app, &headers)?;
    let s = app.inner.read().await;
    s.check_run(&run_id)?;
    let messages = s.transcript(&patient_id)?;
    Ok(Json(json!({"patient_id": patient_id, "messages": messages})).into_response())
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/runs/{id}/discrepancies", get(discrepancies))
        .route("/runs/{id}/verdicts", axum::routing::post(post_verdict))
        .route("/runs/{id}/metrics", get(metrics))
        .route("/runs/{id}/cases/{pid}/transcript", get(transcript))
        .layer(CorsLayer::permissive())
        .with_state(app)
}

/// Load the run and serve until the process is stopped.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), String> {
    let state = ServiceState::load(&config).map_err(|e| e.to_string())?;
    let app = AppState::new(state, config.token.clone());
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| format!("bind {addr}: {e}"))?;
    tracing::info!(%addr, run_id = %config.run_id, "adjudication service listening");
    axum::serve(listener, router(app)).await.map_err(|e| e.to_string())
}
