//! REST endpoints and the background job runner.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use evoscape_core::engine::{self, SimilarityMemo, StepPhase, StepRequest};
use evoscape_core::genome::{validate_initial_prompt, GenomeError};
use evoscape_core::provider::ImageStore;
use evoscape_core::{
    EngineError, Gateway, IndividualId, RatingMap, Session, SessionId, SessionStatus,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::store::{GalleryEntry, GenerationJob, JobKind, JobPhase, Store, StoreError};

pub const DEFAULT_GALLERY_LIMIT: usize = 24;
pub const MAX_GALLERY_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GalleryMode {
    /// Only the favourite of each finished session.
    #[default]
    Favourites,
    /// Every generated image, plus favourites.
    All,
}

/// Where new sessions get their random seed.
#[derive(Debug, Clone, Copy)]
pub enum SeedSource {
    /// Every session uses this seed, making runs repeatable.
    Fixed(u64),
    Random,
}

impl SeedSource {
    fn next(self) -> u64 {
        match self {
            SeedSource::Fixed(seed) => seed,
            SeedSource::Random => rand::random(),
        }
    }
}

/// Error body: `{code, message}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session {id}"))
    }

    fn wrong_state(status: SessionStatus) -> Self {
        ApiError::new(StatusCode::CONFLICT, "WrongState", format!("session is {status:?}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"code": self.code, "message": self.message}))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        tracing::error!(error = %e, "store failure");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "StoreError", e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e.body_text())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::NotTwoParents(_) => ApiError::new(StatusCode::BAD_REQUEST, "NotTwoParents", message),
            EngineError::DuplicateParent(_) => ApiError::new(StatusCode::BAD_REQUEST, "DuplicateParent", message),
            EngineError::UnknownParent(_) => ApiError::new(StatusCode::BAD_REQUEST, "UnknownParent", message),
            EngineError::RatingForNonParent(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "RatingForNonParent", message)
            }
            EngineError::UnknownFavourite(_) => ApiError::new(StatusCode::BAD_REQUEST, "UnknownFavourite", message),
            EngineError::WrongState(status) => ApiError::wrong_state(status),
            EngineError::Genome(_) => ApiError::new(StatusCode::BAD_REQUEST, "InvalidInput", message),
            EngineError::Provider(_) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "ProviderError", message),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Inner {
    store: Arc<dyn Store>,
    gateway: Gateway,
    images: Arc<dyn ImageStore>,
    gallery_mode: GalleryMode,
    seeds: SeedSource,
    /// Serializes every check-and-set on session state across requests and jobs.
    state_lock: Mutex<()>,
    memos: Mutex<HashMap<SessionId, SimilarityMemo>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(
        store: Arc<dyn Store>,
        gateway: Gateway,
        images: Arc<dyn ImageStore>,
        gallery_mode: GalleryMode,
        seeds: SeedSource,
    ) -> Self {
        AppState(Arc::new(Inner {
            store,
            gateway,
            images,
            gallery_mode,
            seeds,
            state_lock: Mutex::new(()),
            memos: Mutex::new(HashMap::new()),
        }))
    }

    /// Replays every job a previous process left unfinished. Jobs are pure
    /// functions of the stored session and request, so the replay yields what
    /// the interrupted run would have. Needs a running tokio runtime.
    pub fn recover(&self) -> Result<usize, StoreError> {
        let pending: Vec<_> = self.0.store.jobs()?.into_iter().filter(|j| !j.phase.is_terminal()).collect();
        for job in &pending {
            tracing::info!(job = %job.job_id, session = %job.session_id, "resuming interrupted job");
            self.spawn(job.clone());
        }
        Ok(pending.len())
    }

    fn spawn(&self, job: GenerationJob) {
        let state = self.clone();
        tokio::task::spawn_blocking(move || state.run(job));
    }

    fn set_phase(&self, job: &mut GenerationJob, phase: JobPhase) {
        if job.phase == phase {
            return;
        }
        if let Err(e) = job.advance(phase).and_then(|_| self.0.store.put_job(job)) {
            tracing::warn!(job = %job.job_id, error = %e, "could not record job phase");
        }
    }

    fn run(&self, mut job: GenerationJob) {
        let inner = &self.0;
        let Ok(Some(mut session)) = inner.store.session(&job.session_id) else {
            let _ = job.fail("session missing from store").and_then(|_| inner.store.put_job(&job));
            return;
        };
        let already_committed = match job.kind {
            JobKind::Initialize => !session.generations.is_empty(),
            JobKind::Step { .. } => session.status != SessionStatus::Generating,
        };
        if already_committed {
            // a previous process stored the result but stopped before closing the job
            let _ = job.advance(JobPhase::Done).and_then(|_| inner.store.put_job(&job));
            return;
        }
        let kind = job.kind.clone();
        let mut memo = inner.memos.lock().unwrap().remove(&session.id).unwrap_or_default();
        let mut on_phase = |phase: StepPhase| {
            let phase = match phase {
                StepPhase::GeneratingAttributes => JobPhase::GeneratingAttributes,
                StepPhase::GeneratingImages => JobPhase::GeneratingImages,
            };
            self.set_phase(&mut job, phase);
        };
        let outcome = match &kind {
            JobKind::Initialize => engine::initialize_population(&session.prompt, &inner.gateway, &mut on_phase)
                .map(|generation| session.generations.push(generation)),
            JobKind::Step { request } => {
                // the stored session is Generating while the job runs; the engine works on a copy
                session.status = SessionStatus::AwaitingSelection;
                engine::next_generation(&mut session, request, &inner.gateway, &mut memo, &mut on_phase)
            }
        };
        inner.memos.lock().unwrap().insert(session.id.clone(), memo);

        let _guard = inner.state_lock.lock().unwrap();
        let result = match outcome {
            Ok(()) => self.commit(&mut job, session),
            Err(e) => {
                tracing::warn!(job = %job.job_id, error = %e, "generation job failed");
                self.abandon(&mut job, e.to_string())
            }
        };
        if let Err(e) = result {
            tracing::error!(job = %job.job_id, error = %e, "could not record job outcome");
        }
    }

    fn commit(&self, job: &mut GenerationJob, mut session: Session) -> Result<(), StoreError> {
        session.status = SessionStatus::AwaitingSelection;
        self.0.store.put_session(&session)?;
        if self.0.gallery_mode == GalleryMode::All {
            if let Some(latest) = session.latest() {
                let now = Utc::now();
                let entries = latest
                    .members
                    .iter()
                    .map(|m| GalleryEntry {
                        image: m.image.clone(),
                        initial_prompt: session.prompt.to_string(),
                        attributes: m.attributes.clone(),
                        created_at: now,
                        session_id: session.id.clone(),
                        individual_id: m.id.clone(),
                    })
                    .collect();
                self.0.store.publish(entries)?;
            }
        }
        job.advance(JobPhase::Done)?;
        self.0.store.put_job(job)
    }

    /// A failed step returns the session to selection unchanged. A failed
    /// initialization leaves a session without generations; the job error
    /// tells the client to start over.
    fn abandon(&self, job: &mut GenerationJob, message: String) -> Result<(), StoreError> {
        if let JobKind::Step { .. } = job.kind {
            if let Some(mut session) = self.0.store.session(&job.session_id)? {
                session.status = SessionStatus::AwaitingSelection;
                self.0.store.put_session(&session)?;
            }
        }
        job.fail(message)?;
        self.0.store.put_job(job)
    }

    /// Latest job for a session, if any.
    fn latest_job(&self, id: &SessionId) -> Result<Option<GenerationJob>, StoreError> {
        Ok(self
            .0
            .store
            .jobs()?
            .into_iter()
            .filter(|j| &j.session_id == id)
            .max_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.job_id.cmp(&b.job_id))))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/steps", post(start_step))
        .route("/sessions/{id}/finish", post(finish))
        .route("/gallery", get(gallery))
        .route("/images/{file}", get(image))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint") })
        .with_state(state)
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub prompt: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: SessionId,
    pub job_id: String,
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let Json(body) = body?;
    let prompt = validate_initial_prompt(&body.prompt).map_err(|e| match e {
        GenomeError::PromptTooShort(_) => ApiError::new(StatusCode::BAD_REQUEST, "PromptTooShort", e.to_string()),
        other => ApiError::new(StatusCode::BAD_REQUEST, "InvalidInput", other.to_string()),
    })?;
    let session = Session::new(SessionId::new(uuid::Uuid::new_v4().to_string()), prompt, state.0.seeds.next());
    let job = GenerationJob::new(uuid::Uuid::new_v4().to_string(), session.id.clone(), JobKind::Initialize);
    {
        let _guard = state.0.state_lock.lock().unwrap();
        state.0.store.put_session(&session)?;
        state.0.store.put_job(&job)?;
    }
    let created = Created { session_id: session.id.clone(), job_id: job.job_id.clone() };
    state.spawn(job);
    Ok((StatusCode::ACCEPTED, Json(created)))
}

#[derive(Debug, Serialize)]
pub struct JobView {
    pub job_id: String,
    pub phase: JobPhase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub session: Session,
    /// Most recent generation job, running or not.
    pub job: Option<JobView>,
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let id = SessionId::new(id);
    let session = state.0.store.session(&id)?.ok_or_else(|| ApiError::unknown_session(id.as_str()))?;
    let job = state
        .latest_job(&id)?
        .map(|j| JobView { job_id: j.job_id, phase: j.phase, error: j.error });
    Ok(Json(SessionView { session, job }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobStarted {
    pub job_id: String,
}

async fn start_step(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<StepRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<JobStarted>)> {
    let Json(request) = body?;
    let id = SessionId::new(id);
    let job = {
        let _guard = state.0.state_lock.lock().unwrap();
        let mut session = state.0.store.session(&id)?.ok_or_else(|| ApiError::unknown_session(id.as_str()))?;
        if session.status != SessionStatus::AwaitingSelection {
            return Err(ApiError::wrong_state(session.status));
        }
        engine::validate_step(&session, &request)?;
        session.status = SessionStatus::Generating;
        let job = GenerationJob::new(uuid::Uuid::new_v4().to_string(), id, JobKind::Step { request });
        state.0.store.put_session(&session)?;
        state.0.store.put_job(&job)?;
        job
    };
    let started = JobStarted { job_id: job.job_id.clone() };
    state.spawn(job);
    Ok((StatusCode::ACCEPTED, Json(started)))
}

#[derive(Debug, Deserialize)]
pub struct FinishRequest {
    pub favourite_id: IndividualId,
    #[serde(default)]
    pub ratings: RatingMap,
}

async fn finish(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<FinishRequest>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let Json(body) = body?;
    let id = SessionId::new(id);
    let _guard = state.0.state_lock.lock().unwrap();
    let mut session = state.0.store.session(&id)?.ok_or_else(|| ApiError::unknown_session(id.as_str()))?;
    engine::finish_session(&mut session, &body.favourite_id, body.ratings)?;
    let favourite = session.find(&body.favourite_id).expect("favourite was validated");
    let entry = GalleryEntry {
        image: favourite.image.clone(),
        initial_prompt: session.prompt.to_string(),
        attributes: favourite.attributes.clone(),
        created_at: Utc::now(),
        session_id: session.id.clone(),
        individual_id: favourite.id.clone(),
    };
    state.0.store.put_session(&session)?;
    state.0.store.publish(vec![entry])?;
    state.0.memos.lock().unwrap().remove(&session.id);
    let job = state
        .latest_job(&id)?
        .map(|j| JobView { job_id: j.job_id, phase: j.phase, error: j.error });
    Ok(Json(SessionView { session, job }))
}

#[derive(Debug, Deserialize)]
pub struct PageQuery {
    #[serde(default)]
    pub offset: usize,
    pub limit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GalleryPage {
    pub entries: Vec<GalleryEntry>,
    pub offset: usize,
    pub limit: usize,
    pub total: usize,
}

async fn gallery(
    State(state): State<AppState>,
    query: Result<Query<PageQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Json<GalleryPage>> {
    let Query(query) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e.body_text()))?;
    let limit = query.limit.unwrap_or(DEFAULT_GALLERY_LIMIT).min(MAX_GALLERY_LIMIT);
    let (entries, total) = state.0.store.gallery(query.offset, limit)?;
    Ok(Json(GalleryPage { entries, offset: query.offset, limit, total }))
}

async fn image(State(state): State<AppState>, Path(file): Path<String>) -> ApiResult<Response> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "UnknownImage", format!("no image {file}"));
    let digest = file.strip_suffix(".png").ok_or_else(not_found)?;
    let bytes = state.0.images.get(digest).ok_or_else(not_found)?;
    Ok(([(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "public, max-age=31536000, immutable")], bytes)
        .into_response())
}
