//! HTTP interface.
//!
//! | route | reply |
//! |---|---|
//! | `POST /sessions` (multipart) | 201 with the session id and stage report |
//! | `GET /sessions/{id}` | manifest |
//! | `GET /sessions/{id}/features` | feature profile |
//! | `GET /sessions/{id}/description` | description document |
//! | `GET /sessions/{id}/reconstruction.png[?at=ms]` | replayed canvas |
//! | `GET /sessions/{id}/prompt` | assembled prompt |
//! | `POST /corpus` | 202, builds a new index in the background |
//! | `GET /corpus` | index status |
//! | `GET /healthz` | liveness |
//!
//! Multipart fields of `POST /sessions`: `metadata` (the action log, required),
//! `image` (final PNG), `annotations`, `questionnaire`, `canvas` (`WxH`).

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use drawsight_core::renderer::{encode_png, reconstruct_at, RenderOptions};
use drawsight_core::retrieval::{build_index, ChunkIndex, ChunkingConfig, CorpusDocument, Embedder, Strategy};
use drawsight_core::stroke_log::{parse_session, Canvas};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::Config;
use crate::llm::LlmClient;
use crate::pipeline::{pipeline_run, PipelineContext, PipelineInput, StageError};
use crate::record::{SessionRecord, Stage, StageReport, StageStatus};
use crate::store::{RecordStore, StoreError};

const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, Default, Serialize)]
pub struct CorpusStatus {
    pub building: bool,
    pub strategy: Option<Strategy>,
    pub chunks: usize,
    pub provider_id: Option<String>,
    pub last_error: Option<String>,
}

pub struct AppState {
    pub config: Config,
    pub store: Arc<dyn RecordStore>,
    pub embedder: Arc<dyn Embedder>,
    pub llm: Option<LlmClient>,
    index: RwLock<Option<Arc<ChunkIndex>>>,
    building: AtomicBool,
    last_build_error: Mutex<Option<String>>,
    clock: fn() -> u64,
}

/// Held while an index build runs; a second build is refused until dropped.
pub struct BuildGuard {
    state: Arc<AppState>,
}

impl Drop for BuildGuard {
    fn drop(&mut self) {
        self.state.building.store(false, Ordering::SeqCst);
    }
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl AppState {
    pub fn new(
        config: Config,
        store: Arc<dyn RecordStore>,
        embedder: Arc<dyn Embedder>,
        index: Option<ChunkIndex>,
    ) -> Arc<Self> {
        Arc::new(Self {
            config,
            store,
            embedder,
            llm: None,
            index: RwLock::new(index.map(Arc::new)),
            building: AtomicBool::new(false),
            last_build_error: Mutex::new(None),
            clock: unix_now,
        })
    }

    pub fn with_llm(mut self: Arc<Self>, llm: Option<LlmClient>) -> Arc<Self> {
        Arc::get_mut(&mut self).expect("configure before sharing").llm = llm;
        self
    }

    pub fn with_clock(mut self: Arc<Self>, clock: fn() -> u64) -> Arc<Self> {
        Arc::get_mut(&mut self).expect("configure before sharing").clock = clock;
        self
    }

    pub fn index(&self) -> Option<Arc<ChunkIndex>> {
        self.index.read().expect("index lock").clone()
    }

    pub fn try_begin_build(self: &Arc<Self>) -> Option<BuildGuard> {
        self.building
            .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
            .ok()
            .map(|_| BuildGuard { state: self.clone() })
    }

    pub fn corpus_status(&self) -> CorpusStatus {
        let index = self.index();
        CorpusStatus {
            building: self.building.load(Ordering::SeqCst),
            strategy: index.as_ref().map(|i| i.strategy),
            chunks: index.as_ref().map_or(0, |i| i.chunks.len()),
            provider_id: index.as_ref().map(|i| i.provider_id.clone()),
            last_error: self.last_build_error.lock().expect("status lock").clone(),
        }
    }

    /// Runs the pipeline against the current index and stores the record.
    pub fn analyze(&self, input: PipelineInput) -> Result<SessionRecord, ApiError> {
        let index = self.index();
        let ctx = PipelineContext {
            config: &self.config,
            embedder: self.embedder.as_ref(),
            index: index.as_deref(),
            llm: self.llm.as_ref(),
        };
        let record = pipeline_run(input, &ctx, (self.clock)())?;
        Ok(self.store.put(&record)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            status,
            kind: kind.into(),
            message: message.into(),
        }
    }

    fn bad_request(kind: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, kind, message)
    }
}

impl From<StageError> for ApiError {
    fn from(e: StageError) -> Self {
        let status = if e.is_client_error() {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::BAD_GATEWAY
        };
        Self::new(status, e.kind, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Immutable(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.kind(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "error": self.kind, "message": self.message })),
        )
            .into_response()
    }
}

pub fn parse_canvas(s: &str) -> Result<Canvas, String> {
    let (w, h) = s
        .trim()
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let width = w.parse().map_err(|_| format!("bad width in {s:?}"))?;
    let height = h.parse().map_err(|_| format!("bad height in {s:?}"))?;
    Canvas::new(width, height).map_err(|e| e.to_string())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_manifest))
        .route("/sessions/{id}/features", get(get_features))
        .route("/sessions/{id}/description", get(get_description))
        .route("/sessions/{id}/reconstruction.png", get(get_reconstruction))
        .route("/sessions/{id}/prompt", get(get_prompt))
        .route("/corpus", post(post_corpus).get(get_corpus))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Serialize)]
struct Created {
    session_id: String,
    stages: Vec<StageReport>,
}

async fn read_multipart(mut form: Multipart) -> Result<PipelineInput, ApiError> {
    let mut input = PipelineInput::default();
    let mut metadata = None;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request("MalformedMultipart", e.to_string()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request("MalformedMultipart", e.to_string()))?
            .to_vec();
        match name.as_str() {
            "metadata" => metadata = Some(bytes),
            "image" => input.final_png = Some(bytes),
            "annotations" => input.annotations = Some(bytes),
            "questionnaire" => input.questionnaire = Some(bytes),
            "canvas" => {
                let text = String::from_utf8_lossy(&bytes);
                input.canvas = Some(parse_canvas(&text).map_err(|e| ApiError::bad_request("InvalidCanvas", e))?);
            }
            other => {
                return Err(ApiError::bad_request(
                    "UnknownField",
                    format!("unexpected field {other:?}"),
                ))
            }
        }
    }
    input.session_log =
        metadata.ok_or_else(|| ApiError::bad_request("MissingField", "field `metadata` is required"))?;
    Ok(input)
}

async fn create_session(State(state): State<Arc<AppState>>, form: Multipart) -> Result<Response, ApiError> {
    let input = read_multipart(form).await?;
    let record = tokio::task::spawn_blocking(move || state.analyze(input))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))??;
    let body = Created {
        session_id: record.session_id,
        stages: record.stages,
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn load(state: &AppState, id: &str) -> Result<SessionRecord, ApiError> {
    Ok(state.store.get(id)?)
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

fn not_available(record: &SessionRecord, stage: Stage) -> ApiError {
    let reason = match record.stage(stage) {
        Some(StageStatus::Skipped { reason }) => reason.clone(),
        _ => "not produced".into(),
    };
    ApiError::new(StatusCode::NOT_FOUND, "StageSkipped", format!("{stage}: {reason}"))
}

async fn get_manifest(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(json_bytes(load(&state, &id).await?.manifest_json()))
}

async fn get_features(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(json_bytes(load(&state, &id).await?.features_json()))
}

async fn get_description(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let record = load(&state, &id).await?;
    record
        .description_json()
        .map(json_bytes)
        .ok_or_else(|| not_available(&record, Stage::Description))
}

#[derive(Deserialize)]
struct AtQuery {
    at: Option<i64>,
}

async fn get_reconstruction(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<AtQuery>,
) -> Result<Response, ApiError> {
    let record = load(&state, &id).await?;
    let png = match q.at {
        None => record.reconstruction_png,
        Some(t) => {
            let session = parse_session(&record.session_log, record.canvas)
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.kind(), e.to_string()))?;
            let options = RenderOptions {
                supersample: state.config.render.supersample.max(1),
            };
            encode_png(&reconstruct_at(&session, t, options).image)
        }
    };
    Ok(([(header::CONTENT_TYPE, "image/png")], Bytes::from(png)).into_response())
}

async fn get_prompt(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let record = load(&state, &id).await?;
    match record.prompt {
        Some(p) => Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], p).into_response()),
        None => Err(not_available(&record, Stage::Prompt)),
    }
}

#[derive(Deserialize)]
struct CorpusRequest {
    documents: Vec<CorpusDocument>,
    #[serde(default)]
    strategy: Option<Strategy>,
}

async fn post_corpus(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let request: CorpusRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request("MalformedJson", e.to_string()))?;
    if request.documents.iter().all(|d| d.text.trim().is_empty()) {
        return Err(ApiError::bad_request("EmptyCorpus", "corpus has no usable text"));
    }
    let guard = state.try_begin_build().ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "BuildInProgress",
            "an index build is already running",
        )
    })?;
    let config = ChunkingConfig {
        strategy: request.strategy.unwrap_or(state.config.chunking.strategy),
        ..state.config.chunking
    };
    let documents = request.documents;
    let worker = state.clone();
    tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let result = build_index(&documents, &config, worker.embedder.as_ref(), (worker.clock)());
        let mut last_error = worker.last_build_error.lock().expect("status lock");
        match result {
            Ok(index) => {
                *last_error = worker
                    .config
                    .retrieval
                    .index_path
                    .as_ref()
                    .and_then(|path| std::fs::write(path, index.to_bytes()).err())
                    .map(|e| format!("index built but not saved: {e}"));
                *worker.index.write().expect("index lock") = Some(Arc::new(index));
            }
            Err(e) => *last_error = Some(format!("{}: {e}", e.kind())),
        }
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "status": "building", "strategy": config.strategy })),
    )
        .into_response())
}

async fn get_corpus(State(state): State<Arc<AppState>>) -> Json<CorpusStatus> {
    Json(state.corpus_status())
}
