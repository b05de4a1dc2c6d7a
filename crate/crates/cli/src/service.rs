//! HTTP API over a model store.
//!
//! ```text
//! GET  /health
//! POST /datasets                      CSV body -> dataset id
//! GET  /datasets
//! POST /models                        {dataset_id, spec, priors?, mcmc?, train_end?} -> job id
//! GET  /models
//! GET  /models/{id}                   status and, once done, summaries
//! GET  /models/{id}/forecast?h=&seed= forecast needing no future rows
//! POST /models/{id}/forecast          {horizon, seed, future}
//! POST /models/{id}/allocate          allocation request -> frontier
//! GET  /models/{id}/diagnostics?max_points=&threshold=
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use goodwill::dataset::{self, Dataset};
use goodwill::model::{DiagnosticsReport, FittedModel};
use goodwill::{store, Error};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

use crate::api_error::ApiError;
use crate::ops::{self, AllocateRequest, FitRequest, FutureRow, Tables};
use crate::registry::{FitStatus, ModelEntry, Registry};

pub const DATASETS_DIR: &str = "datasets";
pub const BODY_LIMIT: usize = 64 * 1024 * 1024;

type ApiResult<T> = std::result::Result<T, ApiError>;

pub struct AppState {
    registry: Registry,
    jobs: Semaphore,
    cache: Mutex<HashMap<String, Arc<FittedModel>>>,
}

impl AppState {
    /// Open the store at `root`; fits run at most `workers` at a time.
    pub fn open(root: &Path, workers: usize) -> goodwill::Result<(Arc<Self>, Vec<String>)> {
        let (registry, requeue) = Registry::open(root)?;
        std::fs::create_dir_all(root.join(DATASETS_DIR))?;
        Ok((
            Arc::new(Self {
                registry,
                jobs: Semaphore::new(workers.max(1)),
                cache: Mutex::new(HashMap::new()),
            }),
            requeue,
        ))
    }

    fn root(&self) -> &Path {
        self.registry.root()
    }

    fn dataset_path(&self, id: &str) -> ApiResult<PathBuf> {
        let ok = id.starts_with("d-") && id.len() > 2 && id[2..].chars().all(|c| c.is_ascii_hexdigit());
        if !ok {
            return Err(ApiError::not_found(format!("no dataset `{id}`")));
        }
        Ok(self.root().join(DATASETS_DIR).join(format!("{id}.csv")))
    }

    fn load_dataset(&self, id: &str) -> ApiResult<Dataset> {
        let path = self.dataset_path(id)?;
        if !path.is_file() {
            return Err(ApiError::not_found(format!("no dataset `{id}`")));
        }
        Ok(dataset::load_csv(path)?)
    }

    /// A finished model, loaded once and shared; draw stores never change after `done`.
    fn model(&self, id: &str) -> ApiResult<Arc<FittedModel>> {
        let entry = self.registry.get(id)?;
        if entry.status != FitStatus::Done {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "not_ready",
                format!("model `{id}` is {:?}", entry.status).to_lowercase(),
            ));
        }
        if let Some(m) = self.cache.lock().expect("cache lock").get(id) {
            return Ok(m.clone());
        }
        let m = Arc::new(store::load(&self.registry.dir(id)?)?);
        self.cache.lock().expect("cache lock").insert(id.to_string(), m.clone());
        Ok(m)
    }
}

fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(serde_json::json!({ "status": "ok" })) }))
        .route("/datasets", post(upload_dataset).get(list_datasets))
        .route("/models", post(create_model).get(list_models))
        .route("/models/{id}", get(get_model))
        .route("/models/{id}/forecast", get(forecast_get).post(forecast_post))
        .route("/models/{id}/allocate", post(allocate))
        .route("/models/{id}/diagnostics", get(diagnostics))
        .fallback(|| async { ApiError::not_found("no such route") })
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Resubmit jobs that were queued when the store was last open.
pub fn resume(state: &Arc<AppState>, ids: Vec<String>) {
    for id in ids {
        spawn_fit(state.clone(), id);
    }
}

/// Bind `addr` and serve until ctrl-c.
pub async fn serve(root: &Path, workers: usize, addr: &str) -> goodwill::Result<()> {
    let (state, requeue) = AppState::open(root, workers)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} on {}", root.display(), listener.local_addr()?);
    resume(&state, requeue);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn rejected(e: impl std::fmt::Display) -> ApiError {
    ApiError::bad_request(e.to_string())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub dataset_id: String,
    pub rows: usize,
    pub channels: Vec<String>,
    pub regressors: Vec<String>,
    pub first_week: Option<chrono::NaiveDate>,
    pub last_week: Option<chrono::NaiveDate>,
}

fn info(id: &str, d: &Dataset) -> DatasetInfo {
    DatasetInfo {
        dataset_id: id.to_string(),
        rows: d.len(),
        channels: d.channel_names(),
        regressors: d.regressor_names(),
        first_week: d.week_start.first().copied(),
        last_week: d.week_start.last().copied(),
    }
}

async fn upload_dataset(State(state): State<Arc<AppState>>, body: String) -> ApiResult<Response> {
    blocking(move || {
        let d = dataset::read_csv(body.as_bytes())?;
        let id = format!("d-{}", digest(&[body.as_bytes()]));
        let path = state.dataset_path(&id)?;
        if !path.is_file() {
            store::write_atomic(&path, body.as_bytes())?;
        }
        Ok((StatusCode::CREATED, Json(info(&id, &d))).into_response())
    })
    .await
}

async fn list_datasets(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<String>>> {
    blocking(move || {
        let mut ids: Vec<String> = std::fs::read_dir(state.root().join(DATASETS_DIR))
            .map_err(Error::from)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str()?.strip_suffix(".csv").map(str::to_string))
            .collect();
        ids.sort();
        Ok(Json(ids))
    })
    .await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateModel {
    pub dataset_id: String,
    #[serde(flatten)]
    pub request: FitRequest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobCreated {
    pub model_id: String,
    pub status: FitStatus,
    /// False when an identical job already existed.
    pub created: bool,
}

async fn create_model(State(state): State<Arc<AppState>>, req: Result<Json<CreateModel>, JsonRejection>) -> ApiResult<Response> {
    let Json(req) = req.map_err(rejected)?;
    let st = state.clone();
    let (entry, fresh) = blocking(move || {
        let d = st.load_dataset(&req.dataset_id)?;
        // Reject bad configurations before anything is queued.
        dataset::resolve_spec(&req.request.config.spec, &d)?;
        req.request.config.mcmc.validate()?;
        req.request.config.priors.validate()?;
        let canonical = serde_json::to_vec(&req.request).map_err(Error::from)?;
        let id = format!("m-{}", digest(&[req.dataset_id.as_bytes(), &canonical]));
        Ok(st.registry.insert(ModelEntry::queued(&id, &req.dataset_id, req.request))?)
    })
    .await?;
    if fresh {
        spawn_fit(state, entry.id.clone());
    }
    let status = if fresh { StatusCode::ACCEPTED } else { StatusCode::OK };
    Ok((
        status,
        Json(JobCreated {
            model_id: entry.id,
            status: entry.status,
            created: fresh,
        }),
    )
        .into_response())
}

fn spawn_fit(state: Arc<AppState>, id: String) {
    tokio::spawn(async move {
        let Ok(_permit) = state.jobs.acquire().await else {
            return;
        };
        let st = state.clone();
        let outcome = tokio::task::spawn_blocking(move || run_fit(&st, &id)).await;
        if let Err(e) = outcome {
            log::error!("fit task panicked: {e}");
        }
    });
}

fn run_fit(state: &AppState, id: &str) {
    let entry = match state.registry.transition(id, FitStatus::Running, |e| e.started = Some(Utc::now())) {
        Ok(e) => e,
        Err(e) => {
            log::error!("cannot start {id}: {e}");
            return;
        }
    };
    let result = (|| -> ApiResult<bool> {
        let dataset_id = entry.dataset_id.as_deref().unwrap_or_default();
        let d = state.load_dataset(dataset_id)?;
        let req = entry.request.as_ref().ok_or_else(|| ApiError::bad_request("job has no fit request"))?;
        let summary = ops::fit_to_dir(&d, req, &state.registry.dir(id)?)?;
        Ok(summary.converged)
    })();
    let done = match result {
        Ok(converged) => state.registry.transition(id, FitStatus::Done, |e| {
            e.completed = Some(Utc::now());
            e.converged = Some(converged);
        }),
        Err(err) => {
            log::warn!("fit {id} failed: {}", err.body.message);
            state.registry.transition(id, FitStatus::Failed, |e| {
                e.completed = Some(Utc::now());
                e.error = Some(err.body);
            })
        }
    };
    if let Err(e) = done {
        log::error!("cannot record the outcome of {id}: {e}");
    }
}

async fn list_models(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<ModelEntry>>> {
    blocking(move || Ok(Json(state.registry.list()?))).await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelView {
    #[serde(flatten)]
    pub entry: ModelEntry,
    pub channels: Option<Vec<String>>,
    pub regressors: Option<Vec<String>>,
    pub last_week: Option<chrono::NaiveDate>,
    pub diagnostics: Option<DiagnosticsSummary>,
    pub tables: Option<Tables>,
    pub evaluation: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub rhat_variant: String,
    pub threshold: f64,
    pub max_rhat: Option<f64>,
    pub converged: bool,
}

fn optional<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> ApiResult<Option<T>> {
    match store::read_json(dir, name) {
        Ok(v) => Ok(Some(v)),
        Err(Error::NotFound(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

async fn get_model(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ModelView>> {
    blocking(move || {
        let entry = state.registry.get(&id)?;
        let mut view = ModelView {
            entry,
            channels: None,
            regressors: None,
            last_week: None,
            diagnostics: None,
            tables: None,
            evaluation: None,
        };
        if view.entry.status == FitStatus::Done {
            let m = state.model(&id)?;
            let dir = state.registry.dir(&id)?;
            view.channels = Some(m.channels().to_vec());
            view.regressors = Some(m.regressors());
            view.last_week = Some(m.last_week);
            view.diagnostics = optional::<DiagnosticsReport>(&dir, "diagnostics.json")?.map(|r| DiagnosticsSummary {
                rhat_variant: r.rhat_variant,
                threshold: r.threshold,
                max_rhat: r.max_rhat,
                converged: r.converged,
            });
            view.tables = Some(match optional(&dir, "tables.json")? {
                Some(t) => t,
                None => ops::tables(&m),
            });
            view.evaluation = optional(&dir, "evaluation.json")?;
        }
        Ok(Json(view))
    })
    .await
}

#[derive(Debug, Clone, Deserialize)]
pub struct ForecastQuery {
    pub h: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastBody {
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub future: Option<Vec<FutureRow>>,
}

async fn forecast_get(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    q: Result<Query<ForecastQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = q.map_err(rejected)?;
    let body = ForecastBody {
        horizon: q.h.ok_or_else(|| ApiError::bad_request("query parameter `h` is required"))?,
        seed: q.seed,
        future: None,
    };
    run_forecast(state, id, body).await
}

async fn forecast_post(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ForecastBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body.map_err(rejected)?;
    run_forecast(state, id, body).await
}

async fn run_forecast(state: Arc<AppState>, id: String, body: ForecastBody) -> ApiResult<Response> {
    blocking(move || {
        let m = state.model(&id)?;
        let future = match &body.future {
            Some(rows) => Some(ops::future_frame(rows, m.last_week)?),
            None => None,
        };
        let f = ops::forecast(&m, body.horizon, future.as_ref(), body.seed)?;
        Ok(Json(f).into_response())
    })
    .await
}

async fn allocate(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    req: Result<Json<AllocateRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = req.map_err(rejected)?;
    blocking(move || {
        let m = state.model(&id)?;
        Ok(Json(ops::allocate(&m, &req)?).into_response())
    })
    .await
}

#[derive(Debug, Clone, Deserialize)]
pub struct DiagnosticsQuery {
    pub max_points: Option<usize>,
    pub threshold: Option<f64>,
}

async fn diagnostics(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    q: Result<Query<DiagnosticsQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = q.map_err(rejected)?;
    blocking(move || {
        let m = state.model(&id)?;
        let d = ops::diagnose(
            &m,
            q.threshold.unwrap_or(ops::RHAT_THRESHOLD),
            q.max_points.unwrap_or(ops::DEFAULT_TRACE_POINTS),
        )?;
        Ok(Json(d).into_response())
    })
    .await
}
