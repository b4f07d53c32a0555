//! HTTP API over a directory of project files.
//!
//! Every project carries an in-memory revision that starts at 1 when the
//! file is first read and increases by one on each accepted `PUT`, even when
//! the body is unchanged. A `PUT` that sends `If-Match` with an older revision
//! is refused with 409. Writes go to a temporary file that is synced and then
//! renamed over the original before the response is sent.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Multipart, Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use sonir_core::data::{parse_csv, DataType, Dataset};
use sonir_core::mapping::parse;
use sonir_core::project::{load_project_str, validate, Diagnostic, Project, ProjectError};
use sonir_core::synth::{ParameterDescriptor, SynthRegistry};
use sonir_core::wav::SampleFormat;

pub const REVISION_HEADER: &str = "x-render-revision";

#[derive(Debug, Clone)]
struct Stored {
    text: String,
    revision: u64,
}

/// Project files in one directory, cached by name. All access goes through
/// one async mutex, so writes are serialized.
#[derive(Debug)]
pub struct ProjectStore {
    dir: PathBuf,
    cache: Mutex<HashMap<String, Stored>>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 128
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || b == b'.')
        && !name.starts_with('.')
}

impl ProjectStore {
    pub fn new(dir: PathBuf) -> Self {
        ProjectStore {
            dir,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.json"))
    }

    async fn names(&self) -> std::io::Result<Vec<String>> {
        let mut names = Vec::new();
        let mut entries = tokio::fs::read_dir(&self.dir).await?;
        while let Some(entry) = entries.next_entry().await? {
            let path = entry.path();
            if path.extension().is_some_and(|e| e == "json") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    if valid_name(stem) {
                        names.push(stem.to_string());
                    }
                }
            }
        }
        names.sort();
        Ok(names)
    }

    async fn get(&self, name: &str) -> Result<Stored, ApiError> {
        if !valid_name(name) {
            return Err(ApiError::NotFound(format!("project `{name}`")));
        }
        let mut cache = self.cache.lock().await;
        if let Some(s) = cache.get(name) {
            return Ok(s.clone());
        }
        let text = match tokio::fs::read_to_string(self.path(name)).await {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ApiError::NotFound(format!("project `{name}`")))
            }
            Err(e) => return Err(ApiError::Internal(e.to_string())),
        };
        let stored = Stored { text, revision: 1 };
        cache.insert(name.to_string(), stored.clone());
        Ok(stored)
    }

    /// Writes `text` if `expected` (when given) matches the current revision.
    /// Returns the new revision.
    async fn put(&self, name: &str, text: String, expected: Option<u64>) -> Result<u64, ApiError> {
        let mut cache = self.cache.lock().await;
        let current = match cache.get(name) {
            Some(s) => Some(s.revision),
            None if self.path(name).exists() => Some(1),
            None => None,
        };
        if let Some(want) = expected {
            if current.unwrap_or(0) != want {
                return Err(ApiError::Conflict {
                    current: current.unwrap_or(0),
                    sent: want,
                });
            }
        }
        let path = self.path(name);
        let dir = self.dir.clone();
        let body = text.clone();
        tokio::task::spawn_blocking(move || write_durably(&dir, &path, body.as_bytes()))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))?
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        let revision = current.unwrap_or(0) + 1;
        cache.insert(name.to_string(), Stored { text, revision });
        Ok(revision)
    }
}

fn write_durably(dir: &Path, path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("project")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    // make the rename itself durable where the platform allows it
    if let Ok(d) = std::fs::File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

pub struct AppState {
    pub store: ProjectStore,
    pub registry: SynthRegistry,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Conflict { current: u64, sent: u64 },
    Invalid(Vec<Diagnostic>),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::NotFound(what) => (StatusCode::NOT_FOUND, json!({ "error": format!("{what} not found") })),
            ApiError::Conflict { current, sent } => (
                StatusCode::CONFLICT,
                json!({ "error": format!("revision {sent} is stale"), "revision": current }),
            ),
            ApiError::Invalid(d) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "project is not valid", "diagnostics": d }),
            ),
            ApiError::Internal(m) => {
                log::error!("{m}");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m }))
            }
        };
        (status, Json(body)).into_response()
    }
}

/// Turns load failures into diagnostics where the cause is the request body.
fn load_error(e: ProjectError) -> ApiError {
    match e {
        ProjectError::Invalid(d) => ApiError::Invalid(d),
        ProjectError::Synth(_) | ProjectError::Graph(_) => ApiError::Internal(e.to_string()),
        other => ApiError::Invalid(vec![Diagnostic::project(other.to_string())]),
    }
}

pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/synths", get(list_synths))
        .route("/api/projects", get(list_projects))
        .route("/api/projects/:name", get(get_project).put(put_project))
        .route("/api/datasets", post(upload_dataset))
        .route("/api/datasets/:name", get(get_dataset))
        .route("/api/mappings/check", post(check_mapping))
        .route("/api/render", post(render))
        .with_state(state)
        .layer(CorsLayer::permissive());
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(host: &str, port: u16, project_dir: PathBuf, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let state = Arc::new(AppState {
        store: ProjectStore::new(project_dir),
        registry: SynthRegistry::with_builtins(),
    });
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, ui_dir)).await
}

#[derive(Serialize)]
struct SynthInfo<'a> {
    name: &'a str,
    parameters: &'a [ParameterDescriptor],
}

async fn list_synths(State(state): State<Arc<AppState>>) -> Json<Value> {
    let synths: Vec<SynthInfo> = state
        .registry
        .iter()
        .map(|d| SynthInfo {
            name: &d.name,
            parameters: &d.parameters,
        })
        .collect();
    Json(json!(synths))
}

async fn list_projects(State(state): State<Arc<AppState>>) -> Result<Json<Value>, ApiError> {
    let names = state
        .store
        .names()
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(json!(names)))
}

async fn get_project(State(state): State<Arc<AppState>>, UrlPath(name): UrlPath<String>) -> Result<Response, ApiError> {
    let stored = state.store.get(&name).await?;
    let project: Value =
        serde_json::from_str(&stored.text).map_err(|e| ApiError::Internal(format!("stored project `{name}`: {e}")))?;
    let body = json!({ "name": name, "revision": stored.revision, "project": project });
    Ok(([(header::ETAG, format!("\"{}\"", stored.revision))], Json(body)).into_response())
}

fn if_match(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    match headers.get(header::IF_MATCH) {
        None => Ok(None),
        Some(v) => v
            .to_str()
            .ok()
            .map(|s| s.trim().trim_matches('"'))
            .and_then(|s| s.parse().ok())
            .map(Some)
            .ok_or_else(|| ApiError::BadRequest("If-Match must be a revision number".into())),
    }
}

async fn put_project(
    State(state): State<Arc<AppState>>,
    UrlPath(name): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    if !valid_name(&name) {
        return Err(ApiError::BadRequest(format!("invalid project name `{name}`")));
    }
    let expected = if_match(&headers)?;
    let text = String::from_utf8(body.to_vec()).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let dir = state.store.dir().to_path_buf();
    let registry_state = state.clone();
    let checked = text.clone();
    let problems = tokio::task::spawn_blocking(move || {
        let loaded = load_project_str(&checked, &dir).map_err(load_error)?;
        Ok::<_, ApiError>(validate(&loaded, &registry_state.registry))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    if !problems.is_empty() {
        return Err(ApiError::Invalid(problems));
    }
    // store a normalized rendering of what was accepted
    let normalized = Project::from_json(&text).map_err(load_error)?.to_json();
    let revision = state.store.put(&name, normalized, expected).await?;
    Ok(Json(json!({ "name": name, "revision": revision })))
}

fn dataset_summary(d: &Dataset) -> Value {
    let columns: Vec<Value> = d
        .columns
        .iter()
        .map(|c| {
            let mut v = json!({ "name": c.name, "type": c.dtype });
            if c.dtype == DataType::Quantitative {
                if let Ok(s) = c.stats() {
                    v["min"] = json!(s.min);
                    v["max"] = json!(s.max);
                    v["count"] = json!(s.count);
                }
            }
            v
        })
        .collect();
    json!({ "name": d.name, "rows": d.row_count(), "columns": columns })
}

async fn upload_dataset(State(state): State<Arc<AppState>>, mut multipart: Multipart) -> Result<Json<Value>, ApiError> {
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::BadRequest(e.to_string()))?
    {
        let Some(file_name) = field.file_name().map(str::to_string) else {
            continue;
        };
        let stem = Path::new(&file_name)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        if !valid_name(&stem) {
            return Err(ApiError::BadRequest(format!("invalid dataset name `{file_name}`")));
        }
        let bytes = field.bytes().await.map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let dataset =
            parse_csv(&stem, &bytes).map_err(|e| ApiError::Invalid(vec![Diagnostic::project(e.to_string())]))?;
        let dir = state.store.dir().to_path_buf();
        let path = dir.join(format!("{stem}.csv"));
        tokio::task::spawn_blocking(move || write_durably(&dir, &path, &bytes))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))?
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        return Ok(Json(dataset_summary(&dataset)));
    }
    Err(ApiError::BadRequest("expected a multipart file field".into()))
}

async fn get_dataset(
    State(state): State<Arc<AppState>>,
    UrlPath(name): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    let stem = name.strip_suffix(".csv").unwrap_or(&name);
    if !valid_name(stem) {
        return Err(ApiError::NotFound(format!("dataset `{name}`")));
    }
    let bytes = match tokio::fs::read(state.store.dir().join(format!("{stem}.csv"))).await {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ApiError::NotFound(format!("dataset `{name}`")))
        }
        Err(e) => return Err(ApiError::Internal(e.to_string())),
    };
    let dataset = parse_csv(stem, &bytes).map_err(|e| ApiError::Invalid(vec![Diagnostic::project(e.to_string())]))?;
    Ok(Json(dataset_summary(&dataset)))
}

#[derive(Deserialize)]
struct MappingCheck {
    source: String,
}

async fn check_mapping(Json(req): Json<MappingCheck>) -> Json<Value> {
    Json(match parse(&req.source) {
        Ok(e) => json!({ "ok": true, "canonical": e.to_string() }),
        Err(e) => json!({ "ok": false, "error": e.message, "line": e.line, "column": e.column }),
    })
}

#[derive(Deserialize)]
struct RenderRequest {
    project: String,
}

async fn render(State(state): State<Arc<AppState>>, Json(req): Json<RenderRequest>) -> Result<Response, ApiError> {
    let stored = state.store.get(&req.project).await?;
    let dir = state.store.dir().to_path_buf();
    let worker = state.clone();
    let bytes = tokio::task::spawn_blocking(move || {
        let loaded = load_project_str(&stored.text, &dir).map_err(load_error)?;
        let problems = validate(&loaded, &worker.registry);
        if !problems.is_empty() {
            return Err(ApiError::Invalid(problems));
        }
        crate::render_wav(&loaded, &worker.registry, SampleFormat::Pcm16).map_err(load_error)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok((
        [
            (header::CONTENT_TYPE, "audio/wav".to_string()),
            (
                header::HeaderName::from_static(REVISION_HEADER),
                stored.revision.to_string(),
            ),
        ],
        bytes,
    )
        .into_response())
}
