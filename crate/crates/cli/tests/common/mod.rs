#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use dforge::http::{router, AppState};
use dforge_core::fixtures::{FLOOD_TEMPLATE, WAGGA_BINDING};
use dforge_core::repository::RepositoryStore;

pub const ACTOR: &str = "planner";
pub const AT: &str = "2024-03-01T09:00:00Z";

/// Runs the command line in-process; returns (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = dforge::run(std::iter::once("dforge").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = cli(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

/// The fixture replay through the command line, in `dir`; returns the export.
pub fn replay_cli(dir: &Path) -> String {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    std::fs::write(p("plan.displan"), FLOOD_TEMPLATE).unwrap();
    std::fs::write(p("wagga.binding"), WAGGA_BINDING).unwrap();
    let repo = p("repo.jsonl");
    ok(&["customise", &p("plan.displan"), "-o", &p("t.abm")]);
    ok(&["instantiate", "--template", &p("t.abm"), "--binding", &p("wagga.binding"), "-o", &p("i.abm")]);
    ok(&["conform", "--instance", &p("i.abm"), "--template", &p("t.abm")]);
    ok(&["--repo", &repo, "propose", "--instance", &p("i.abm"), "--template", &p("t.abm")]);
    ok(&["--repo", &repo, "confirm", "--all-accept-top", "--actor", ACTOR, "--at", AT]);
    ok(&["--repo", &repo, "transfer"]);
    ok(&["--repo", &repo, "export"])
}

pub fn app() -> (Router, Arc<AppState>) {
    let state = AppState::new(RepositoryStore::default(), None);
    (router(state.clone()), state)
}

pub async fn call(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

pub async fn call_json(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn expect(app: &Router, method: &str, uri: &str, body: impl Into<Body>, want: StatusCode) -> Value {
    let (status, v) = call_json(app, method, uri, body).await;
    assert_eq!(status, want, "{method} {uri}: {v}");
    v
}

/// The fixture replay through the HTTP API; returns the export.
pub async fn replay_http(app: &Router) -> String {
    let c = expect(app, "POST", "/v1/customise", FLOOD_TEMPLATE, StatusCode::OK).await;
    let template = c["document"].as_str().unwrap().to_string();
    let template_id = c["plan_id"].as_str().unwrap().to_string();
    let body = json!({ "template": template, "binding": WAGGA_BINDING }).to_string();
    let i = expect(app, "POST", "/v1/instantiate", body, StatusCode::OK).await;
    let instance = i["document"].as_str().unwrap().to_string();
    let body = json!({ "instance": instance, "template": template }).to_string();
    let report = expect(app, "POST", "/v1/conform", body, StatusCode::OK).await;
    assert_eq!(report["findings"], json!([]));
    let uri = format!("/v1/plans?template_id={template_id}");
    expect(app, "POST", &uri, instance, StatusCode::CREATED).await;
    let body = json!({ "actor": ACTOR, "at": AT }).to_string();
    let plan = i["plan_id"].as_str().unwrap();
    expect(app, "POST", &format!("/v1/plans/{plan}/accept-top"), body, StatusCode::OK).await;
    expect(app, "POST", "/v1/transfer", "", StatusCode::OK).await;
    let (status, bytes) = call(app, "GET", "/v1/export", "").await;
    assert_eq!(status, StatusCode::OK);
    String::from_utf8(bytes).unwrap()
}
