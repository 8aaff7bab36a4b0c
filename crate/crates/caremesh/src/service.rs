//! HTTP API over sessions, uploads, chat, analyst queries and workflow runs.
//! Every state change is written to disk before the response is sent.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use caremesh_core::analyst::{answer_question, AnalystError};
use caremesh_core::kernel::RunState;
use caremesh_core::provider::HashedEmbedder;
use caremesh_core::rag::{answer, extract_text, RagError, DEFAULT_TOP_K};
use caremesh_core::workflows::Intake;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::Config;
use crate::csvload::ingest_csv;
use crate::pdf::BasicPdfExtractor;
use crate::pool::WorkerPool;
use crate::runtime::{self, media_type_for, Backends, MediaUpload, WorkflowInput, WORKFLOWS};
use crate::store::{now, DataDir, DatasetInfo, ErrorBody, RunRecord, Session, StoreError};

pub const MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        Self { status, body: ErrorBody::new(code, detail) }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", format!("{what} not found"))
    }

    fn bad_input(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "InvalidInput", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<RagError> for ApiError {
    fn from(e: RagError) -> Self {
        let status = match e {
            RagError::UnsupportedMediaType(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            RagError::EmptyIndex => StatusCode::CONFLICT,
            RagError::ExtractionFailure(_) => StatusCode::UNPROCESSABLE_ENTITY,
            RagError::InvalidChunkParams(_) => StatusCode::BAD_REQUEST,
            RagError::Provider(_) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<AnalystError> for ApiError {
    fn from(e: AnalystError) -> Self {
        let status = match e {
            AnalystError::EmptyQuestion => StatusCode::BAD_REQUEST,
            AnalystError::Provider(_) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub struct AppState {
    data: DataDir,
    backends: Backends,
    pool: WorkerPool,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl AppState {
    /// Opens the data directory and recovers runs left unfinished by a
    /// previous process: queued runs are resubmitted, runs that were already
    /// executing are marked failed.
    pub fn open(cfg: &Config) -> Result<Arc<Self>, StoreError> {
        std::fs::create_dir_all(&cfg.data_dir).map_err(|source| StoreError::Io { path: cfg.data_dir.display().to_string(), source })?;
        let state = Arc::new(Self {
            data: DataDir::new(&cfg.data_dir),
            backends: Backends::from_config(cfg),
            pool: WorkerPool::new(cfg.workers),
            locks: Mutex::new(HashMap::new()),
        });
        state.recover()?;
        Ok(state)
    }

    pub fn data(&self) -> &DataDir {
        &self.data
    }

    /// Waits for queued and running jobs, then stops the workers.
    pub fn shutdown(&self) {
        self.pool.shutdown();
    }

    fn recover(self: &Arc<Self>) -> Result<(), StoreError> {
        for mut run in self.data.all_runs()? {
            match run.state {
                RunState::Running => {
                    run.state = RunState::Failed;
                    run.error = Some(ErrorBody::new("Interrupted", "the service stopped while this run was executing"));
                    run.updated_at = now();
                    self.data.save_run(&run)?;
                }
                RunState::Pending => {
                    let state = Arc::clone(self);
                    self.pool.submit(move || state.process(run));
                }
                RunState::Completed | RunState::Failed => {}
            }
        }
        Ok(())
    }

    fn session_lock(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table poisoned");
        Arc::clone(locks.entry(id.to_string()).or_default())
    }

    /// Runs `f` on the session while holding its exclusive lock.
    fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> ApiResult<T>) -> ApiResult<T> {
        let lock = self.session_lock(id);
        let _guard = lock.lock().expect("session lock poisoned");
        let mut session = self.data.load_session(id)?.ok_or_else(|| ApiError::not_found("session"))?;
        f(&mut session)
    }

    fn start_run(self: &Arc<Self>, input: WorkflowInput, session: Option<String>) -> ApiResult<String> {
        let run_id = uuid::Uuid::new_v4().simple().to_string();
        let run = RunRecord {
            run_id: run_id.clone(),
            workflow: input.name().into(),
            session_id: session.clone(),
            state: RunState::Pending,
            steps_done: 0,
            result_ref: None,
            error: None,
            created_at: now(),
            updated_at: now(),
            transcript: None,
            result: None,
        };
        let input = serde_json::to_value(&input).map_err(|e| ApiError::bad_input(e.to_string()))?;
        let persist = || -> ApiResult<()> {
            self.data.save_run_input(&run, &input)?;
            self.data.save_run(&run)?;
            Ok(())
        };
        match &session {
            Some(id) => self.with_session(id, |s| {
                persist()?;
                s.run_ids.push(run_id.clone());
                Ok(self.data.save_session(s)?)
            })?,
            None => persist()?,
        }
        let state = Arc::clone(self);
        if !self.pool.submit(move || state.process(run)) {
            return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "ShuttingDown", "the service is stopping"));
        }
        Ok(run_id)
    }

    fn process(&self, mut run: RunRecord) {
        if let Err(e) = self.process_inner(&mut run) {
            tracing::error!(run_id = %run.run_id, error = %e, "run bookkeeping failed");
            run.state = RunState::Failed;
            run.error = Some(ErrorBody::new(e.code(), e.to_string()));
            run.updated_at = now();
            let _ = self.data.save_run(&run);
        }
    }

    fn process_inner(&self, run: &mut RunRecord) -> Result<(), StoreError> {
        let input: WorkflowInput = serde_json::from_value(self.data.load_run_input(run)?)
            .map_err(|e| StoreError::Corrupt { path: format!("input of run {}", run.run_id), reason: e.to_string() })?;
        let started = now();
        run.state = RunState::Running;
        run.updated_at = started.clone();
        self.data.save_run(run)?;

        let outcome = runtime::execute(&input, &self.backends, &run.run_id);
        let mut transcript = outcome.transcript.clone();
        transcript.started_at = Some(started);
        transcript.finished_at = Some(now());
        run.steps_done = transcript.completed_steps().count();
        run.error = outcome.error_body();
        match &outcome.result {
            Ok(value) => {
                run.result_ref = Some(self.data.save_result(run, value)?);
                run.result = Some(value.clone());
                run.state = RunState::Completed;
                if let (Some(session), Some((title, body))) = (&run.session_id, &outcome.report) {
                    if let Err(e) = self.ingest_report(session, title, body) {
                        tracing::warn!(run_id = %run.run_id, error = %e.body.detail, "report not added to knowledge base");
                    }
                }
            }
            Err(_) => run.state = RunState::Failed,
        }
        transcript.status = run.state;
        run.transcript = Some(transcript);
        run.updated_at = now();
        self.data.save_run(run)
    }

    fn ingest_report(&self, session: &str, title: &str, body: &str) -> ApiResult<()> {
        self.with_session(session, |s| {
            let mut kb = self.data.load_kb(s)?;
            let doc_id = kb.add_document(title, body, &HashedEmbedder)?;
            self.data.save_kb(&s.id, &kb)?;
            s.doc_ids.push(doc_id);
            Ok(self.data.save_session(s)?)
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(get_session))
        .route("/sessions/:id/documents", post(upload_document))
        .route("/sessions/:id/chat", post(chat))
        .route("/sessions/:id/datasets", post(upload_dataset))
        .route("/sessions/:id/query", post(query))
        .route("/workflows/:name", post(start_workflow))
        .route("/runs/:id", get(get_run))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "InternalError", e.to_string()))?
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_input(format!("invalid JSON body: {e}")))
}

async fn create_session(State(st): State<Arc<AppState>>) -> ApiResult<impl IntoResponse> {
    let session = blocking(move || Ok(st.data.create_session()?)).await?;
    Ok((StatusCode::CREATED, Json(json!({"id": session.id}))))
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Session>> {
    let session = blocking(move || st.data.load_session(&id)?.ok_or_else(|| ApiError::not_found("session"))).await?;
    Ok(Json(session))
}

struct UploadedFile {
    name: Option<String>,
    media_type: Option<String>,
    bytes: Vec<u8>,
}

impl UploadedFile {
    /// Declared type, falling back to the file extension.
    fn media_type(&self) -> String {
        self.media_type
            .clone()
            .filter(|m| !m.is_empty() && m != "application/octet-stream")
            .or_else(|| self.name.as_deref().and_then(media_type_for).map(str::to_string))
            .unwrap_or_else(|| "application/octet-stream".into())
    }
}

#[derive(Default)]
struct Form {
    files: Vec<(String, UploadedFile)>,
    fields: HashMap<String, String>,
}

async fn read_form(mut mp: Multipart) -> ApiResult<Form> {
    let mut form = Form::default();
    while let Some(field) = mp.next_field().await.map_err(|e| ApiError::bad_input(e.to_string()))? {
        let key = field.name().unwrap_or_default().to_string();
        let name = field.file_name().map(str::to_string);
        let media_type = field.content_type().map(str::to_string);
        let bytes = field.bytes().await.map_err(|e| ApiError::bad_input(e.to_string()))?.to_vec();
        if name.is_some() {
            form.files.push((key, UploadedFile { name, media_type, bytes }));
        } else {
            form.fields.insert(key, String::from_utf8_lossy(&bytes).into_owned());
        }
    }
    Ok(form)
}

async fn upload_document(State(st): State<Arc<AppState>>, Path(id): Path<String>, mp: Multipart) -> ApiResult<impl IntoResponse> {
    let mut form = read_form(mp).await?;
    if form.files.is_empty() {
        return Err(ApiError::bad_input("expected a file part"));
    }
    let (_, file) = form.files.remove(0);
    let source_name = form.fields.remove("source_name").or_else(|| file.name.clone()).unwrap_or_else(|| "document".into());
    let (doc_id, chunks) = blocking(move || {
        let text = extract_text(&file.bytes, &file.media_type(), &BasicPdfExtractor)?;
        st.with_session(&id, |s| {
            let mut kb = st.data.load_kb(s)?;
            let doc_id = kb.add_document(&source_name, &text, &HashedEmbedder)?;
            st.data.save_kb(&s.id, &kb)?;
            s.doc_ids.push(doc_id.clone());
            st.data.save_session(s)?;
            let n = kb.chunks_of(&doc_id).map_or(0, <[_]>::len);
            Ok((doc_id, n))
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(json!({"doc_id": doc_id, "chunks": chunks}))))
}

#[derive(Deserialize)]
struct ChatBody {
    question: String,
    k: Option<usize>,
}

async fn chat(State(st): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let body: ChatBody = parse_json(&body)?;
    if body.question.trim().is_empty() {
        return Err(ApiError::bad_input("question is empty"));
    }
    let out = blocking(move || {
        let session = st.data.load_session(&id)?.ok_or_else(|| ApiError::not_found("session"))?;
        let kb = st.data.load_kb(&session)?;
        if kb.chunk_count() == 0 {
            return Err(RagError::EmptyIndex.into());
        }
        let provider = st.backends.provider().map_err(RagError::Provider)?;
        let grounded = answer(&kb, &body.question, body.k.unwrap_or(DEFAULT_TOP_K), &HashedEmbedder, &*provider)?;
        Ok(serde_json::to_value(grounded).unwrap_or(Value::Null))
    })
    .await?;
    Ok(Json(out))
}

async fn upload_dataset(State(st): State<Arc<AppState>>, Path(id): Path<String>, mp: Multipart) -> ApiResult<impl IntoResponse> {
    let mut form = read_form(mp).await?;
    if form.files.is_empty() {
        return Err(ApiError::bad_input("expected a CSV file part"));
    }
    let (_, file) = form.files.remove(0);
    let info = blocking(move || {
        let table = ingest_csv(&file.bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.code(), e.to_string()))?;
        let info = DatasetInfo::of(&table);
        st.with_session(&id, |s| {
            st.data.save_dataset(&s.id, &file.bytes)?;
            s.table = Some(info.clone());
            Ok(st.data.save_session(s)?)
        })?;
        Ok(info)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(info)))
}

#[derive(Deserialize)]
struct QueryBody {
    question: String,
}

async fn query(State(st): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let body: QueryBody = parse_json(&body)?;
    let out = blocking(move || {
        let session = st.data.load_session(&id)?.ok_or_else(|| ApiError::not_found("session"))?;
        if session.table.is_none() {
            return Err(ApiError::new(StatusCode::CONFLICT, "NoDataset", "upload a CSV dataset first"));
        }
        let csv = st.data.load_dataset(&session.id)?;
        let table = ingest_csv(&csv).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string()))?;
        let provider = st.backends.provider().map_err(AnalystError::Provider)?;
        let answer = answer_question(&body.question, &table, &*provider)?;
        Ok(serde_json::to_value(answer).unwrap_or(Value::Null))
    })
    .await?;
    Ok(Json(out))
}

#[derive(Deserialize)]
struct RunParams {
    session: Option<String>,
}

#[derive(Deserialize)]
struct TopicBody {
    topic: String,
}

fn support_input(body: &[u8]) -> ApiResult<WorkflowInput> {
    let mut v: Value = parse_json(body)?;
    if let Some(inner) = v.get_mut("intake") {
        v = inner.take();
    }
    let intake: Intake = serde_json::from_value(v).map_err(|e| ApiError::bad_input(format!("invalid intake: {e}")))?;
    intake.validate().map_err(|e| ApiError::bad_input(e.to_string()))?;
    Ok(WorkflowInput::SupportPlan { intake })
}

fn topic_of(body: &[u8]) -> ApiResult<String> {
    let t: TopicBody = parse_json(body)?;
    if t.topic.trim().is_empty() {
        return Err(ApiError::bad_input("topic is empty"));
    }
    Ok(t.topic)
}

async fn media_input(name: &str, req: axum::extract::Request) -> ApiResult<WorkflowInput> {
    let mp = <Multipart as axum::extract::FromRequest<()>>::from_request(req, &())
        .await
        .map_err(|e| ApiError::bad_input(format!("expected multipart form data: {e}")))?;
    let form = read_form(mp).await?;
    let uploads: Vec<MediaUpload> = form.files.iter().map(|(_, f)| MediaUpload::new(&f.media_type(), &f.bytes)).collect();
    if name == "imaging" {
        let image = uploads.into_iter().next().ok_or_else(|| ApiError::bad_input("expected an image file part"))?;
        return Ok(WorkflowInput::Imaging { image });
    }
    let prompt = form.fields.get("prompt").cloned().unwrap_or_default();
    if uploads.is_empty() && prompt.trim().is_empty() {
        return Err(ApiError::bad_input("need at least one media file or a prompt"));
    }
    Ok(WorkflowInput::Multimodal { media: uploads, prompt })
}

async fn start_workflow(
    State(st): State<Arc<AppState>>,
    Path(name): Path<String>,
    Query(params): Query<RunParams>,
    req: axum::extract::Request,
) -> ApiResult<impl IntoResponse> {
    if !WORKFLOWS.contains(&name.as_str()) {
        return Err(ApiError::not_found(&format!("workflow `{name}`")));
    }
    let input = match name.as_str() {
        "imaging" | "multimodal" => media_input(&name, req).await?,
        _ => {
            let body = axum::body::to_bytes(req.into_body(), MAX_UPLOAD_BYTES).await.map_err(|e| ApiError::bad_input(e.to_string()))?;
            match name.as_str() {
                "support-plan" => support_input(&body)?,
                "deep-research" => WorkflowInput::DeepResearch { topic: topic_of(&body)? },
                _ => WorkflowInput::ResearchCare { topic: topic_of(&body)? },
            }
        }
    };
    let run_id = blocking(move || st.start_run(input, params.session)).await?;
    Ok((StatusCode::ACCEPTED, Json(json!({"run_id": run_id}))))
}

async fn get_run(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = blocking(move || st.data.load_run_bytes(&id)?.ok_or_else(|| ApiError::not_found("run"))).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

/// Binds, serves until Ctrl-C or SIGTERM, then drains the worker pool.
pub async fn serve(cfg: Config, on_ready: impl FnOnce(std::net::SocketAddr)) -> std::io::Result<()> {
    let state = AppState::open(&cfg).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind((cfg.bind.as_str(), cfg.port)).await?;
    on_ready(listener.local_addr()?);
    axum::serve(listener, router(Arc::clone(&state))).with_graceful_shutdown(shutdown_signal()).await?;
    tokio::task::spawn_blocking(move || state.shutdown()).await.map_err(std::io::Error::other)
}
