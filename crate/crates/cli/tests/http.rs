mod common;

use axum::http::StatusCode;
use serde_json::json;

use common::{app, call, call_json, replay_cli, replay_http, ACTOR, AT};

#[tokio::test]
async fn catalog_lists_every_concept() {
    let (app, _) = app();
    let (status, v) = call_json(&app, "GET", "/v1/catalog", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["concepts"].as_array().unwrap().len(), 92);
    assert_eq!(v["default"], true);
}

#[tokio::test]
async fn replay_matches_the_command_line() {
    let (app, _) = app();
    let over_http = replay_http(&app).await;
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(over_http, replay_cli(dir.path()));
}

#[tokio::test]
async fn deciding_twice_conflicts() {
    let (app, _) = app();
    replay_http(&app).await;
    let (_, v) = call_json(&app, "GET", "/v1/proposals?status=confirmed", "").await;
    let id = v[0]["id"].as_str().unwrap().to_string();
    let body = json!({ "decision": "reject", "reason": "late", "actor": "other" }).to_string();
    let (status, v) = call_json(&app, "POST", &format!("/v1/proposals/{id}/decision"), body).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "already-decided");
    assert!(v["message"].is_string());
}

#[tokio::test]
async fn error_envelopes() {
    let (app, _) = app();
    let (status, v) = call_json(&app, "GET", "/v1/nowhere", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "no-route");

    let (status, v) = call_json(&app, "POST", "/v1/instantiate", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "malformed-body");

    let (status, _) = call_json(&app, "GET", "/v1/cube?tag=wizard", "").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call_json(&app, "POST", "/v1/transfer", json!({ "plan": "nowhere" }).to_string()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let body = json!({ "decision": "accept-top", "actor": ACTOR }).to_string();
    let (status, _) = call_json(&app, "POST", "/v1/proposals/p:missing/decision", body).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_choices_are_unprocessable() {
    let (app, _) = app();
    let (_, c) = call_json(&app, "POST", "/v1/customise", dforge_core::fixtures::FLOOD_TEMPLATE).await;
    let template = c["document"].as_str().unwrap();
    let body = json!({ "template": template, "binding": dforge_core::fixtures::WAGGA_BINDING }).to_string();
    let (_, i) = call_json(&app, "POST", "/v1/instantiate", body).await;
    let (status, proposals) = call_json(&app, "POST", "/v1/plans", i["document"].as_str().unwrap().to_string()).await;
    assert_eq!(status, StatusCode::CREATED);
    let p = &proposals[0];
    let id = p["id"].as_str().unwrap();
    let phase = p["phase"].as_str().unwrap();
    let outside = format!("{phase}/{phase}-concept-01");
    let uri = format!("/v1/proposals/{id}/decision");

    let body = json!({ "decision": "select", "concept": outside, "actor": ACTOR, "at": AT }).to_string();
    let (status, v) = call_json(&app, "POST", &uri, body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{v} {outside}");

    let body = json!({ "decision": "reject", "reason": "", "actor": ACTOR }).to_string();
    let (status, v) = call_json(&app, "POST", &uri, body).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "missing-reason");

    let (status, _) = call_json(&app, "POST", "/v1/plans", "<abm-set>").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn cube_and_view() {
    let (app, _) = app();
    replay_http(&app).await;
    let (status, v) = call_json(&app, "GET", "/v1/cube?phase=response&tag=goal", "").await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["free"], json!(["mof"]));
    let mofs: Vec<&str> = v["groups"].as_array().unwrap().iter().map(|g| g["key"]["mof"].as_str().unwrap()).collect();
    assert_eq!(mofs, ["m0", "m1"]);

    let (status, v) = call_json(&app, "GET", "/v1/plans/wagga-wagga/view?phase=response&goal=Road%20Information", "").await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["goals"][0]["label"], "Providing Road Information Service (RIS)");

    let (status, v) = call_json(&app, "GET", "/v1/plans/wagga-wagga/view?phase=response&goal=sandbags", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(v["detail"]["nearest"].is_array(), "{v}");

    let (status, _) = call_json(&app, "GET", "/v1/plans/wagga-wagga/view?goal=x", "").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn import_replaces_the_store() {
    let (source, _) = app();
    let doc = replay_http(&source).await;
    let (target, state) = app();
    let (status, v) = call_json(&target, "POST", "/v1/import", doc.clone()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["units"], 39);
    assert_eq!(state.export().await, doc);
    let (status, body) = call(&target, "GET", "/v1/export", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, doc.as_bytes());
}

#[tokio::test]
async fn server_file_is_saved_after_mutations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("repo.jsonl");
    let state = dforge::http::AppState::new(Default::default(), Some(path.clone()));
    let app = dforge::http::router(state.clone());
    let doc = replay_http(&app).await;
    assert_eq!(std::fs::read_to_string(&path).unwrap(), doc);
}
