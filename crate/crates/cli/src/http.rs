//! The `/v1` JSON API over one repository store.
//!
//! Reads share the store; every mutation holds the write lock for its whole
//! duration and, when the server was started over a file, saves the store
//! before the lock is released.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::RwLock;

use dforge_core::pipeline::ProposalStatus;
use dforge_core::repository::RepositoryStore;

use crate::repo;
use crate::service::{self, DecisionRequest, ErrorKind, ServiceError};

pub struct AppState {
    store: RwLock<RepositoryStore>,
    file: Option<PathBuf>,
}

impl AppState {
    pub fn new(store: RepositoryStore, file: Option<PathBuf>) -> Arc<AppState> {
        Arc::new(AppState { store: RwLock::new(store), file })
    }

    pub async fn export(&self) -> String {
        self.store.read().await.export()
    }
}

type Shared = Arc<AppState>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self.kind {
            ErrorKind::BadRequest => StatusCode::BAD_REQUEST,
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Conflict => StatusCode::CONFLICT,
            ErrorKind::Invalid => StatusCode::UNPROCESSABLE_ENTITY,
        };
        (status, Json(self.envelope())).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

fn body_json<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::new(ErrorKind::BadRequest, "malformed-body", e))
}

fn body_text(body: &Bytes) -> ApiResult<&str> {
    std::str::from_utf8(body).map_err(|e| ServiceError::new(ErrorKind::BadRequest, "malformed-body", e))
}

/// Runs `f` under the write lock and saves the store afterwards.
async fn mutate<T>(state: &AppState, f: impl FnOnce(&mut RepositoryStore) -> ApiResult<T>) -> ApiResult<T> {
    let mut store = state.store.write().await;
    let out = f(&mut store)?;
    if let Some(path) = &state.file {
        repo::save(path, &store).map_err(|e| ServiceError::new(ErrorKind::Conflict, "save-failed", e))?;
    }
    Ok(out)
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/catalog", get(catalog))
        .route("/v1/cube", get(cube))
        .route("/v1/plans", post(register_plan))
        .route("/v1/plans/{plan}/view", get(view))
        .route("/v1/plans/{plan}/accept-top", post(accept_top))
        .route("/v1/proposals", get(proposals))
        .route("/v1/proposals/{id}/decision", post(decide))
        .route("/v1/transfer", post(transfer))
        .route("/v1/customise", post(customise))
        .route("/v1/instantiate", post(instantiate))
        .route("/v1/conform", post(conform))
        .route("/v1/export", get(export))
        .route("/v1/import", post(import))
        .fallback(not_found)
        .with_state(state)
}

async fn not_found() -> ServiceError {
    ServiceError::new(ErrorKind::NotFound, "no-route", "no such endpoint")
}

async fn catalog(State(s): State<Shared>) -> impl IntoResponse {
    Json(service::catalog(&*s.store.read().await))
}

async fn cube(State(s): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult<impl IntoResponse> {
    let slice = service::slice(q.get("phase").map(String::as_str), q.get("mof").map(String::as_str), q.get("tag").map(String::as_str))?;
    Ok(Json(service::cube(&*s.store.read().await, slice)))
}

#[derive(Deserialize)]
struct ViewQuery {
    goal: Option<String>,
    phase: Option<String>,
}

async fn view(State(s): State<Shared>, Path(plan): Path<String>, Query(q): Query<ViewQuery>) -> ApiResult<impl IntoResponse> {
    let missing = |what: &str| ServiceError::new(ErrorKind::BadRequest, "missing-parameter", format!("`{what}` is required"));
    let goal = q.goal.ok_or_else(|| missing("goal"))?;
    let phase = service::parse_phase(&q.phase.ok_or_else(|| missing("phase"))?)?;
    Ok(Json(service::stakeholder_view(&*s.store.read().await, &plan, &goal, phase)?))
}

#[derive(Deserialize)]
struct ProposalQuery {
    status: Option<String>,
    plan: Option<String>,
}

async fn proposals(State(s): State<Shared>, Query(q): Query<ProposalQuery>) -> ApiResult<impl IntoResponse> {
    let status = match q.status.as_deref() {
        None | Some("") | Some("all") => None,
        Some(raw) => Some(
            raw.parse::<ProposalStatus>()
                .map_err(|e| ServiceError::new(ErrorKind::BadRequest, "bad-status", e))?,
        ),
    };
    Ok(Json(service::proposals(&*s.store.read().await, status, q.plan.as_deref())))
}

async fn decide(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: DecisionRequest = body_json(&body)?;
    let outcome = mutate(&s, |store| service::decide(store, &id, req)).await?;
    Ok(Json(outcome))
}

#[derive(Deserialize)]
struct PlanQuery {
    template_id: Option<String>,
}

async fn register_plan(State(s): State<Shared>, Query(q): Query<PlanQuery>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let doc = body_text(&body)?.to_string();
    let template_id = q.template_id.unwrap_or_else(|| crate::DEFAULT_TEMPLATE_ID.to_string());
    let out = mutate(&s, |store| service::register_plan(store, &doc, &template_id)).await?;
    Ok((StatusCode::CREATED, Json(out)))
}

#[derive(Deserialize)]
struct ActorBody {
    actor: String,
    #[serde(default)]
    at: Option<DateTime<Utc>>,
}

async fn accept_top(State(s): State<Shared>, Path(plan): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: ActorBody = body_json(&body)?;
    Ok(Json(mutate(&s, |store| service::accept_top(store, Some(&plan), &b.actor, b.at)).await?))
}

#[derive(Deserialize, Default)]
struct TransferBody {
    #[serde(default)]
    plan: Option<String>,
}

async fn transfer(State(s): State<Shared>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: TransferBody = if body.is_empty() { TransferBody::default() } else { body_json(&body)? };
    Ok(Json(mutate(&s, |store| service::transfer(store, b.plan.as_deref())).await?))
}

async fn customise(body: Bytes) -> ApiResult<impl IntoResponse> {
    Ok(Json(service::customise_template(body_text(&body)?)?))
}

#[derive(Serialize, Deserialize)]
struct InstantiateBody {
    template: String,
    binding: String,
    #[serde(default)]
    allow_unbound: Vec<String>,
}

async fn instantiate(body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: InstantiateBody = body_json(&body)?;
    Ok(Json(service::instantiate_models(&b.template, &b.binding, &b.allow_unbound)?))
}

#[derive(Deserialize)]
struct ConformBody {
    instance: String,
    template: String,
}

async fn conform(body: Bytes) -> ApiResult<impl IntoResponse> {
    let b: ConformBody = body_json(&body)?;
    Ok(Json(service::conform(&b.instance, &b.template)?))
}

async fn export(State(s): State<Shared>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/x-ndjson")], s.export().await)
}

async fn import(State(s): State<Shared>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let imported = service::import(body_text(&body)?)?;
    let summary = json!({ "plans": imported.plans().count(), "units": imported.unit_count() });
    mutate(&s, |store| {
        *store = imported;
        Ok(())
    })
    .await?;
    Ok(Json(summary))
}

/// Serves the API until interrupted.
pub async fn serve(addr: &str, state: Shared) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
