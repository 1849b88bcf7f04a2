//! JSON HTTP service running enumeration jobs in the background.

use std::collections::HashMap;
use std::ops::ControlFlow;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use molenum::{ElementTable, EnumerationStats, Enumerator, StopReason, TreeRepresentation};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::job::{Defaults, FieldErrors, JobSpec};
use crate::render::{graph_json, GraphJson};

pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 1000;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Jobs queued or running at once; further submissions get 429.
    pub max_jobs: usize,
    /// Finished jobs untouched for this long are dropped.
    pub ttl: Duration,
    pub defaults: Defaults,
    pub static_dir: Option<PathBuf>,
    pub table: ElementTable,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_jobs: 4,
            ttl: Duration::from_secs(3600),
            defaults: Defaults::default(),
            static_dir: None,
            table: ElementTable::builtin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Cancelled,
    Failed,
    BudgetExhausted,
}

impl JobState {
    fn is_finished(self) -> bool {
        !matches!(self, JobState::Queued | JobState::Running)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JobStatus {
    pub id: String,
    pub state: JobState,
    pub models_found: usize,
    pub elapsed_seconds: f64,
    pub warning_flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultItem {
    pub index: usize,
    pub smiles: String,
    pub graph: GraphJson,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultPage {
    pub offset: usize,
    /// Results available so far.
    pub total: usize,
    /// No further results will be appended.
    pub complete: bool,
    pub items: Vec<ResultItem>,
}

struct Progress {
    state: JobState,
    results: Vec<TreeRepresentation>,
    started: Option<Instant>,
    finished: Option<Instant>,
    stats: Option<EnumerationStats>,
    error: Option<String>,
}

struct Job {
    id: String,
    progress: Mutex<Progress>,
    cancel: Arc<AtomicBool>,
    touched: Mutex<Instant>,
}

impl Job {
    fn lock(&self) -> MutexGuard<'_, Progress> {
        self.progress.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn touch(&self) {
        *self.touched.lock().unwrap_or_else(|e| e.into_inner()) = Instant::now();
    }

    fn status(&self) -> JobStatus {
        let p = self.lock();
        let elapsed = match (p.started, p.finished) {
            (Some(s), Some(f)) => f - s,
            (Some(s), None) => s.elapsed(),
            _ => Duration::ZERO,
        };
        let mut warning_flags = Vec::new();
        if let Some(stats) = &p.stats {
            if stats.unkeyed > 0 {
                warning_flags.push(format!("{} results could not be deduplicated", stats.unkeyed));
            }
            match stats.stop {
                StopReason::MaxModels => warning_flags.push("model limit reached".into()),
                StopReason::TimeLimit => warning_flags.push("time limit reached".into()),
                _ => {}
            }
        }
        JobStatus {
            id: self.id.clone(),
            state: p.state,
            models_found: p.results.len(),
            elapsed_seconds: elapsed.as_secs_f64(),
            warning_flags,
            error: p.error.clone(),
        }
    }
}

struct Service {
    config: ServiceConfig,
    jobs: Mutex<HashMap<String, Arc<Job>>>,
    next_id: AtomicU64,
}

impl Service {
    fn jobs(&self) -> MutexGuard<'_, HashMap<String, Arc<Job>>> {
        self.jobs.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn evict(&self) {
        let ttl = self.config.ttl;
        self.jobs().retain(|_, job| {
            let idle = job.touched.lock().unwrap_or_else(|e| e.into_inner()).elapsed();
            !(job.lock().state.is_finished() && idle > ttl)
        });
    }

    fn find(&self, id: &str) -> Result<Arc<Job>, ApiError> {
        self.evict();
        let job = self
            .jobs()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown job `{id}`")))?;
        job.touch();
        Ok(job)
    }
}

/// An error response: `{"error": message, "fields": {...}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    fields: FieldErrors,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            fields: FieldErrors::new(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = if self.fields.is_empty() {
            json!({ "error": self.message })
        } else {
            json!({ "error": self.message, "fields": self.fields })
        };
        (self.status, Json(body)).into_response()
    }
}

pub fn router(config: ServiceConfig) -> Router {
    let static_dir = config.static_dir.clone();
    let service = Arc::new(Service {
        config,
        jobs: Mutex::new(HashMap::new()),
        next_id: AtomicU64::new(1),
    });
    let api = Router::new()
        .route("/api/v1/jobs", axum::routing::post(create_job))
        .route("/api/v1/jobs/{id}", get(job_status).delete(cancel_job))
        .route("/api/v1/jobs/{id}/results", get(job_results))
        .route("/api/v1/elements", get(elements))
        .with_state(service);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

async fn create_job(
    State(service): State<Arc<Service>>,
    body: Bytes,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    service.evict();
    let invalid = |e: crate::job::SpecError| ApiError {
        status: StatusCode::BAD_REQUEST,
        message: e.to_string(),
        fields: e.fields(),
    };
    let spec = JobSpec::from_json(&body).map_err(invalid)?;
    let enumerator = spec
        .prepare(&service.config.table, service.config.defaults)
        .map_err(invalid)?;
    let job = {
        let mut jobs = service.jobs();
        let active = jobs.values().filter(|j| !j.lock().state.is_finished()).count();
        if active >= service.config.max_jobs {
            return Err(ApiError::new(
                StatusCode::TOO_MANY_REQUESTS,
                format!("{active} jobs are already active"),
            ));
        }
        let id = service.next_id.fetch_add(1, Ordering::Relaxed).to_string();
        let job = Arc::new(Job {
            id: id.clone(),
            progress: Mutex::new(Progress {
                state: JobState::Queued,
                results: Vec::new(),
                started: None,
                finished: None,
                stats: None,
                error: None,
            }),
            cancel: Arc::new(AtomicBool::new(false)),
            touched: Mutex::new(Instant::now()),
        });
        jobs.insert(id, job.clone());
        job
    };
    let worker = job.clone();
    std::thread::spawn(move || run_job(&worker, enumerator));
    Ok((StatusCode::CREATED, Json(json!({ "id": job.id }))))
}

fn run_job(job: &Job, enumerator: Enumerator) {
    {
        let mut p = job.lock();
        p.state = JobState::Running;
        p.started = Some(Instant::now());
    }
    let outcome = enumerator.cancel_flag(job.cancel.clone()).run(|rep| {
        job.lock().results.push(rep);
        ControlFlow::Continue(())
    });
    let mut p = job.lock();
    p.finished = Some(Instant::now());
    match outcome {
        Ok(stats) => {
            p.state = match stats.stop {
                StopReason::Cancelled => JobState::Cancelled,
                StopReason::MaxModels | StopReason::TimeLimit => JobState::BudgetExhausted,
                StopReason::Completed | StopReason::Found => JobState::Done,
            };
            p.stats = Some(stats);
        }
        Err(e) => {
            p.state = JobState::Failed;
            p.error = Some(e.to_string());
        }
    }
}

async fn job_status(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<Json<JobStatus>, ApiError> {
    Ok(Json(service.find(&id)?.status()))
}

async fn cancel_job(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<(StatusCode, Json<JobStatus>), ApiError> {
    let job = service.find(&id)?;
    let state = job.lock().state;
    if state.is_finished() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("job `{id}` already finished"),
        ));
    }
    job.cancel.store(true, Ordering::Relaxed);
    Ok((StatusCode::ACCEPTED, Json(job.status())))
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn job_results(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
    Query(q): Query<PageQuery>,
) -> Result<Json<ResultPage>, ApiError> {
    let limit = q.limit.unwrap_or(DEFAULT_PAGE);
    if limit > MAX_PAGE {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("limit must be at most {MAX_PAGE}"),
        ));
    }
    let offset = q.offset.unwrap_or(0);
    let job = service.find(&id)?;
    let (slice, total, complete) = {
        let p = job.lock();
        let end = p.results.len().min(offset.saturating_add(limit));
        let slice: Vec<TreeRepresentation> = p.results.get(offset..end).unwrap_or(&[]).to_vec();
        (slice, p.results.len(), p.state.is_finished())
    };
    let table = &service.config.table;
    let items = slice
        .iter()
        .enumerate()
        .map(|(i, rep)| {
            let graph = graph_json(rep, table);
            ResultItem {
                index: offset + i,
                smiles: graph.smiles.clone(),
                graph,
            }
        })
        .collect();
    Ok(Json(ResultPage {
        offset,
        total,
        complete,
        items,
    }))
}

async fn elements(State(service): State<Arc<Service>>) -> Json<serde_json::Value> {
    let elements: Vec<_> = service.config.table.iter().collect();
    Json(json!({ "elements": elements }))
}
