mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use clap::Parser;
use common::read_fixture;
use drawsight::api::{router, AppState};
use drawsight::cli::{run, Cli};
use drawsight::config::Config;
use drawsight::store::{FileStore, MemoryStore, RecordStore};
use drawsight_core::renderer::decode_png;
use drawsight_core::retrieval::HashingEmbedder;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

const BOUNDARY: &str = "drawsight-test-boundary";

fn multipart(parts: &[(&str, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, bytes) in parts {
        body.extend(format!("--{BOUNDARY}\r\ncontent-disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes());
        body.extend(*bytes);
        body.extend(b"\r\n");
    }
    body.extend(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

fn state_with(store: Arc<dyn RecordStore>) -> Arc<AppState> {
    AppState::new(Config::default(), store, Arc::new(HashingEmbedder::default()), None).with_clock(|| 7)
}

fn state() -> Arc<AppState> {
    state_with(Arc::new(MemoryStore::default()))
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn upload(app: &Router, parts: &[(&str, &[u8])]) -> (StatusCode, Value) {
    let req = Request::post("/sessions")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(parts)))
        .unwrap();
    let (status, body) = send(app, req).await;
    (status, serde_json::from_slice(&body).unwrap())
}

fn full_parts() -> Vec<(&'static str, Vec<u8>)> {
    vec![
        ("metadata", read_fixture("golden_session.json")),
        ("image", read_fixture("golden_final.png")),
        ("annotations", read_fixture("golden_annotations.json")),
        ("questionnaire", read_fixture("golden_questionnaire.json")),
    ]
}

fn borrowed<'a>(parts: &'a [(&'static str, Vec<u8>)]) -> Vec<(&'static str, &'a [u8])> {
    parts.iter().map(|(n, b)| (*n, b.as_slice())).collect()
}

fn cli_output(args: &[&str]) -> Vec<u8> {
    let mut out = Vec::new();
    run(Cli::parse_from(args), &mut out).unwrap();
    out
}

#[tokio::test]
async fn healthz() {
    let app = router(state());
    let (status, body) = get(&app, "/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["status"], "ok");
}

#[tokio::test]
async fn upload_matches_cli() {
    let app = router(state());
    let parts = full_parts();
    let (status, created) = upload(&app, &borrowed(&parts)).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["session_id"].as_str().unwrap();
    assert_eq!(created["stages"].as_array().unwrap().len(), 12);

    let (s, features) = get(&app, &format!("/sessions/{id}/features")).await;
    assert_eq!(s, StatusCode::OK);
    let (s, description) = get(&app, &format!("/sessions/{id}/description")).await;
    assert_eq!(s, StatusCode::OK);

    let f = |n: &str| common::fixture(n).display().to_string();
    let (session, ann, q, img) = (
        f("golden_session.json"),
        f("golden_annotations.json"),
        f("golden_questionnaire.json"),
        f("golden_final.png"),
    );
    let base = [
        "drawsight",
        &session,
        "--annotations",
        &ann,
        "--questionnaire",
        &q,
        "--image",
        &img,
    ];
    let cli = |cmd: &'static str| {
        let mut args = vec![base[0], cmd];
        args.extend_from_slice(&base[1..]);
        cli_output(&args)
    };
    assert_eq!(features, cli("analyze"));
    assert_eq!(description, cli("describe"));
}

#[tokio::test]
async fn artifacts_are_served() {
    let app = router(state());
    let parts = full_parts();
    let (_, created) = upload(&app, &borrowed(&parts)).await;
    let id = created["session_id"].as_str().unwrap();

    let (s, png) = get(&app, &format!("/sessions/{id}/reconstruction.png")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(decode_png(&png).unwrap().dimensions(), (800, 600));

    let start = 1_700_000_000_000i64;
    let inked = |bytes: &[u8]| {
        decode_png(bytes)
            .unwrap()
            .pixels()
            .filter(|p| p.0 != [255, 255, 255, 255])
            .count()
    };
    let at = |t: i64| format!("/sessions/{id}/reconstruction.png?at={t}");
    let (s, before) = get(&app, &at(start - 1)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(inked(&before), 0);
    let first_dot = inked(&get(&app, &at(start)).await.1);
    assert!(first_dot > 0 && first_dot < inked(&png));

    let (s, prompt) = get(&app, &format!("/sessions/{id}/prompt")).await;
    assert_eq!(s, StatusCode::OK);
    let prompt = String::from_utf8(prompt).unwrap();
    assert!(prompt.contains("No reference context is available"));

    let (s, manifest) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(serde_json::from_slice::<Value>(&manifest).unwrap()["created_at"], 7);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = router(state());
    for path in ["features", "description", "reconstruction.png", "prompt"] {
        let (status, body) = get(&app, &format!("/sessions/ffffffffffffffff/{path}")).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["error"], "NotFound");
    }
}

#[tokio::test]
async fn validation_errors_are_400() {
    let app = router(state());
    let (status, body) = upload(&app, &[("metadata", b"[{\"order\":".as_slice())]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "MalformedJson");

    let (status, body) = upload(&app, &[("image", read_fixture("golden_final.png").as_slice())]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "MissingField");

    let (status, body) = upload(&app, &[("metadata", b"[]".as_slice()), ("canvas", b"0x10".as_slice())]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "InvalidCanvas");

    let (status, body) = upload(&app, &[("metadata", b"[]".as_slice()), ("extra", b"1".as_slice())]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "UnknownField");
}

#[tokio::test]
async fn session_without_annotations_reports_skips() {
    let app = router(state());
    let log = read_fixture("golden_session.json");
    let (status, created) = upload(&app, &[("metadata", log.as_slice()), ("canvas", b"800x600".as_slice())]).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["session_id"].as_str().unwrap();
    assert_eq!(get(&app, &format!("/sessions/{id}/features")).await.0, StatusCode::OK);
    let (status, body) = get(&app, &format!("/sessions/{id}/description")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["error"], "StageSkipped");
}

fn corpus_request(text: &str) -> Request<Body> {
    let body = serde_json::json!({ "documents": [{ "name": "notes.md", "text": text }], "strategy": "recursive" });
    Request::post("/corpus")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn corpus_build_conflicts_while_running() {
    let state = state();
    let app = router(state.clone());
    let guard = state.try_begin_build().unwrap();
    let (status, body) = send(&app, corpus_request("# A\n\nA dead tree.")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(
        serde_json::from_slice::<Value>(&body).unwrap()["error"],
        "BuildInProgress"
    );
    drop(guard);

    let (status, _) = send(&app, corpus_request("# A\n\nA dead tree.")).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let mut chunks = 0;
    for _ in 0..200 {
        let (_, body) = get(&app, "/corpus").await;
        let v: Value = serde_json::from_slice(&body).unwrap();
        if v["building"] == false && v["chunks"].as_u64().unwrap() > 0 {
            assert_eq!(v["strategy"], "recursive");
            chunks = v["chunks"].as_u64().unwrap();
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert_eq!(chunks, 1);

    let (status, body) = send(&app, corpus_request("   ")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["error"], "EmptyCorpus");
}

#[tokio::test]
async fn indexed_sessions_cite_passages() {
    let state = state();
    let app = router(state.clone());
    let text = String::from_utf8(read_fixture("corpus/houses.md")).unwrap();
    assert_eq!(send(&app, corpus_request(&text)).await.0, StatusCode::ACCEPTED);
    while state.corpus_status().building || state.index().is_none() {
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    let parts = full_parts();
    let (_, created) = upload(&app, &borrowed(&parts)).await;
    let id = created["session_id"].as_str().unwrap();
    let prompt = String::from_utf8(get(&app, &format!("/sessions/{id}/prompt")).await.1).unwrap();
    assert!(prompt.contains("[1] notes.md > Houses"), "{prompt}");
}

#[tokio::test]
async fn file_store_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let first = router(state_with(Arc::new(FileStore::open(dir.path()).unwrap())));
    let parts = full_parts();
    let (_, created) = upload(&first, &borrowed(&parts)).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    let before = get(&first, &format!("/sessions/{id}/features")).await.1;
    drop(first);

    let second = router(state_with(Arc::new(FileStore::open(dir.path()).unwrap())));
    for path in ["features", "description", "reconstruction.png", "prompt"] {
        let (status, _) = get(&second, &format!("/sessions/{id}/{path}")).await;
        assert_eq!(status, StatusCode::OK, "{path}");
    }
    assert_eq!(get(&second, &format!("/sessions/{id}/features")).await.1, before);
}
