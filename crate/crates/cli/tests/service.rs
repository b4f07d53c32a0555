use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sonir_cli::service::{router, AppState, ProjectStore, REVISION_HEADER};
use sonir_core::project::load_project;
use sonir_core::synth::SynthRegistry;
use sonir_core::wav::SampleFormat;
use tower::ServiceExt;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn setup() -> (tempfile::TempDir, Router) {
    let dir = tempfile::tempdir().unwrap();
    for f in ["coral_data.csv", "grain.wav", "coral_demo.json", "fm_demo.json"] {
        std::fs::copy(data(f), dir.path().join(f)).unwrap();
    }
    let app = router(
        Arc::new(AppState {
            store: ProjectStore::new(dir.path().to_path_buf()),
            registry: SynthRegistry::with_builtins(),
        }),
        None,
    );
    (dir, app)
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, _, b) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn put(uri: &str, body: String, revision: Option<u64>) -> Request<Body> {
    let mut req = Request::put(uri).header(header::CONTENT_TYPE, "application/json");
    if let Some(r) = revision {
        req = req.header(header::IF_MATCH, format!("\"{r}\""));
    }
    req.body(Body::from(body)).unwrap()
}

fn post_json(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn synths_include_fm_parameters() {
    let (_dir, app) = setup();
    let (status, body) = get_json(&app, "/api/synths").await;
    assert_eq!(status, StatusCode::OK);
    let fm = body.as_array().unwrap().iter().find(|s| s["name"] == "fm").unwrap();
    let names: Vec<&str> = fm["parameters"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["p3", "p4", "p5", "p6", "p7", "p8"]);
    assert_eq!(fm["parameters"][0]["kind"], "temporal");
    assert_eq!(fm["parameters"][1]["kind"], "timbral_quantitative");
}

#[tokio::test]
async fn project_listing_and_reads() {
    let (_dir, app) = setup();
    let (_, list) = get_json(&app, "/api/projects").await;
    assert_eq!(list, json!(["coral_demo", "fm_demo"]));
    let (status, body) = get_json(&app, "/api/projects/coral_demo").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["revision"], 1);
    assert_eq!(body["project"]["tracks"][0]["name"], "Track 1");
    let (status, _) = get_json(&app, "/api/projects/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    // reads do not change the revision
    let (_, again) = get_json(&app, "/api/projects/coral_demo").await;
    assert_eq!(again["revision"], 1);
}

#[tokio::test]
async fn put_bumps_revision_and_detects_conflicts() {
    let (dir, app) = setup();
    let text = std::fs::read_to_string(dir.path().join("coral_demo.json")).unwrap();
    let (status, _, body) = send(&app, put("/api/projects/coral_demo", text.clone(), Some(1))).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["revision"], 2);
    // unchanged body still counts as a write
    let (status, _, _) = send(&app, put("/api/projects/coral_demo", text.clone(), Some(2))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _, body) = send(&app, put("/api/projects/coral_demo", text.clone(), Some(2))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["revision"], 3);
    let (_, got) = get_json(&app, "/api/projects/coral_demo").await;
    assert_eq!(got["revision"], 3);
    // new projects start at revision 1 and land on disk
    let (status, _, _) = send(&app, put("/api/projects/copy", text, None)).await;
    assert_eq!(status, StatusCode::OK);
    assert!(load_project(&dir.path().join("copy.json")).is_ok());
    assert!(!dir.path().join(".copy.json.tmp").exists());
}

#[tokio::test]
async fn invalid_project_is_rejected_with_diagnostics() {
    let (dir, app) = setup();
    let mut project: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("coral_demo.json")).unwrap()).unwrap();
    project["tracks"][0]["regions"][0]["column"] = json!("salinity");
    let (status, _, body) = send(&app, put("/api/projects/coral_demo", project.to_string(), Some(1))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let body: Value = serde_json::from_slice(&body).unwrap();
    let d = &body["diagnostics"][0];
    assert_eq!(d["track"], "Track 1");
    assert_eq!(d["region"], "temperature");
    assert!(d["message"].as_str().unwrap().contains("salinity"));
    // a rejected write leaves the revision alone
    let (_, got) = get_json(&app, "/api/projects/coral_demo").await;
    assert_eq!(got["revision"], 1);
    let (status, _, _) = send(&app, put("/api/projects/coral_demo", "{".into(), None)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn mapping_check() {
    let (_dir, app) = setup();
    let (_, _, body) = send(
        &app,
        post_json("/api/mappings/check", json!({ "source": "lin(x, min, max, 1, 2)" })),
    )
    .await;
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["ok"], true);
    let (_, _, body) = send(&app, post_json("/api/mappings/check", json!({ "source": "1 +\n (" }))).await;
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["ok"], false);
    assert_eq!((body["line"].as_u64(), body["column"].as_u64()), (Some(2), Some(3)));
}

fn multipart(file_name: &str, content: &str) -> Request<Body> {
    let boundary = "XBOUNDARYX";
    let body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{file_name}\"\r\nContent-Type: text/csv\r\n\r\n{content}\r\n--{boundary}--\r\n"
    );
    Request::post("/api/datasets")
        .header(
            header::CONTENT_TYPE,
            format!("multipart/form-data; boundary={boundary}"),
        )
        .body(Body::from(body))
        .unwrap()
}

#[tokio::test]
async fn dataset_upload_and_lookup() {
    let (dir, app) = setup();
    let (status, _, body) = send(&app, multipart("reef.csv", "t,site\n1,a\n2.5,b\n")).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(body["rows"], 2);
    assert_eq!(
        body["columns"][0],
        json!({ "name": "t", "type": "Q", "min": 1.0, "max": 2.5, "count": 2 })
    );
    assert_eq!(body["columns"][1], json!({ "name": "site", "type": "N" }));
    assert!(Path::new(&dir.path().join("reef.csv")).exists());
    let (status, got) = get_json(&app, "/api/datasets/reef").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got, body);
    let (status, _) = get_json(&app, "/api/datasets/coral_data").await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = get_json(&app, "/api/datasets/missing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = send(&app, multipart("bad.csv", "a,b\n1\n")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn render_matches_cli_path_and_echoes_revision() {
    let (dir, app) = setup();
    let (status, headers, body) = send(&app, post_json("/api/render", json!({ "project": "fm_demo" }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::CONTENT_TYPE], "audio/wav");
    assert_eq!(headers[REVISION_HEADER], "1");
    let frames = u32::from_le_bytes(body[40..44].try_into().unwrap()) / 4;
    assert_eq!(frames, 8 * 44100);
    let loaded = load_project(&dir.path().join("fm_demo.json")).unwrap();
    let direct = sonir_cli::render_wav(&loaded, &SynthRegistry::with_builtins(), SampleFormat::Pcm16).unwrap();
    assert_eq!(body, direct);

    let text = std::fs::read_to_string(dir.path().join("fm_demo.json")).unwrap();
    send(&app, put("/api/projects/fm_demo", text, Some(1))).await;
    let (_, headers, _) = send(&app, post_json("/api/render", json!({ "project": "fm_demo" }))).await;
    assert_eq!(headers[REVISION_HEADER], "2");
    let (status, _, _) = send(&app, post_json("/api/render", json!({ "project": "ghost" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn concurrent_renders_are_isolated() {
    let (_dir, app) = setup();
    let solo_a = send(&app, post_json("/api/render", json!({ "project": "fm_demo" })))
        .await
        .2;
    let solo_b = send(&app, post_json("/api/render", json!({ "project": "coral_demo" })))
        .await
        .2;
    let (a, b) = tokio::join!(
        send(&app, post_json("/api/render", json!({ "project": "fm_demo" }))),
        send(&app, post_json("/api/render", json!({ "project": "coral_demo" })))
    );
    assert_eq!(a.2, solo_a);
    assert_eq!(b.2, solo_b);
}
