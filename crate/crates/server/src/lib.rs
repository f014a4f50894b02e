//! HTTP/JSON service: session solving and interactive scenario stepping.
//!
//! | Method | Path | Body | Result |
//! |--------|------|------|--------|
//! | POST | `/api/session/solve` | session file | solve output |
//! | POST | `/api/scenarios` | scenario file | handle view (201) |
//! | GET | `/api/scenarios/{id}` | | handle view |
//! | POST | `/api/scenarios/{id}/step` | `{expected_version, human_choices?}` | handle view |
//! | GET | `/api/scenarios/{id}/report` | | scenario report |
//!
//! Errors carry `{code, message, detail?}` with 404 for unknown handles,
//! 409 for version conflicts, choices outside an interval, stage order
//! violations and non-decomposable groups, and 422 for everything else
//! the input got wrong.

mod error;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use rgt_core::schema::from_json;
use rgt_core::{ScenarioFile, SessionFile, SolveOutput};
use serde::Deserialize;

pub use error::ApiError;
pub use store::{ChoiceSpec, Store};

#[derive(Debug, Clone)]
pub struct AppState {
    store: Arc<Store>,
}

impl AppState {
    /// Store without snapshots.
    pub fn in_memory() -> Self {
        Self {
            store: Arc::new(Store::default()),
        }
    }

    /// Store that snapshots into `dir` and reloads what it finds there.
    pub async fn with_snapshots(dir: Option<PathBuf>) -> std::io::Result<Self> {
        Ok(Self {
            store: Arc::new(Store::open(dir).await?),
        })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/session/solve", post(solve))
        .route("/api/scenarios", post(create_scenario))
        .route("/api/scenarios/{id}", get(get_scenario))
        .route("/api/scenarios/{id}/step", post(step_scenario))
        .route("/api/scenarios/{id}/report", get(scenario_report))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, snapshot_dir: Option<PathBuf>) -> std::io::Result<()> {
    let state = AppState::with_snapshots(snapshot_dir).await?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text = std::str::from_utf8(body).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "SchemaError",
            e.to_string(),
        )
    })?;
    Ok(from_json(text)?)
}

/// The payload shared with `rgt solve --json`.
pub fn solve_payload(file: &SessionFile) -> rgt_core::Result<SolveOutput> {
    Ok(SolveOutput::new(file.resolve()?.solve()?))
}

async fn solve(body: Bytes) -> Result<Json<SolveOutput>, ApiError> {
    let file: SessionFile = parse_body(&body)?;
    Ok(Json(solve_payload(&file)?))
}

async fn create_scenario(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let file: ScenarioFile = parse_body(&body)?;
    Ok((StatusCode::CREATED, Json(state.store.create(file).await?)))
}

async fn get_scenario(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let handle = state.store.get(&id).await?;
    let view = handle.lock().await.view();
    Ok(Json(view))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRequest {
    expected_version: u64,
    #[serde(default)]
    human_choices: Option<ChoiceSpec>,
}

async fn step_scenario(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    // Unknown handles are reported before body problems.
    state.store.get(&id).await?;
    let request: StepRequest = parse_body(&body)?;
    let view = state
        .store
        .step(&id, request.expected_version, request.human_choices)
        .await?;
    Ok(Json(view))
}

async fn scenario_report(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<rgt_core::ScenarioReport>, ApiError> {
    let handle = state.store.get(&id).await?;
    let report = handle.lock().await.run.report();
    Ok(Json(report))
}
