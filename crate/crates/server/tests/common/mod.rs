//! In-process service over the shipped fixtures, plus request and SSE
//! helpers.
#![allow(dead_code)]

pub mod process;

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use bizchat_core::gateway::Gateway;
use bizchat_core::model::FixedClock;
use bizchat_core::testing::{coffee, epoch, shipped_corpus};
use bizchat_server::{router, AppState, Services};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const BOOTSTRAP: &str = "bootstrap-secret";

pub fn services() -> Services {
    let counter = AtomicU64::new(0);
    Services {
        gateway: Gateway::mock(coffee::store()),
        pages: coffee::sites(),
        corpus: shipped_corpus(),
        clock: Arc::new(FixedClock(epoch())),
        bootstrap_token: Some(BOOTSTRAP.into()),
        token_source: Box::new(move || format!("token-{}", counter.fetch_add(1, Ordering::SeqCst) + 1)),
    }
}

pub fn open(dir: &Path) -> Router {
    router(Arc::new(AppState::open(dir, services()).unwrap()))
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.text()))
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    pub fn events(&self) -> Vec<(String, Value)> {
        parse_sse(&self.text())
    }
}

pub async fn call(app: &Router, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> Reply {
    let mut builder = Request::builder().method(method).uri(path);
    if let Some(token) = token {
        builder = builder.header(header::AUTHORIZATION, format!("Bearer {token}"));
    }
    let request = match body {
        Some(v) => builder.header(header::CONTENT_TYPE, "application/json").body(Body::from(v.to_string())),
        None => builder.body(Body::empty()),
    }
    .unwrap();
    send(app, request).await
}

pub async fn send(app: &Router, request: Request<Body>) -> Reply {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let headers = response.headers().clone();
    let body = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

pub async fn get(app: &Router, path: &str, token: Option<&str>) -> Reply {
    call(app, Method::GET, path, token, None).await
}

pub async fn post(app: &Router, path: &str, token: Option<&str>, body: Value) -> Reply {
    call(app, Method::POST, path, token, Some(body)).await
}

/// `(event, data)` pairs of a complete SSE body.
pub fn parse_sse(text: &str) -> Vec<(String, Value)> {
    text.split("\n\n")
        .filter(|frame| !frame.trim().is_empty())
        .filter_map(|frame| {
            let mut name = String::from("message");
            let mut data = String::new();
            for line in frame.lines() {
                if let Some(v) = line.strip_prefix("event:") {
                    name = v.trim().to_string();
                } else if let Some(v) = line.strip_prefix("data:") {
                    data.push_str(v.strip_prefix(' ').unwrap_or(v));
                }
            }
            (!data.is_empty()).then(|| (name, serde_json::from_str(&data).unwrap()))
        })
        .collect()
}

pub async fn account(app: &Router, name: &str) -> String {
    let reply = post(app, "/auth/token", Some(BOOTSTRAP), json!({"display_name": name})).await;
    assert_eq!(reply.status, StatusCode::CREATED, "{}", reply.text());
    reply.json()["token"].as_str().unwrap().to_string()
}

pub fn coffee_goals() -> Value {
    serde_json::to_value(coffee::goals()).unwrap()
}

/// Onboards the coffee site and returns the new document id.
pub async fn onboard_coffee(app: &Router, token: &str) -> String {
    let reply = post(app, "/onboard/website", Some(token), json!({"url": coffee::URL, "goals": coffee_goals()})).await;
    assert_eq!(reply.status, StatusCode::ACCEPTED);
    let events = reply.events();
    let (name, data) = events.last().unwrap();
    assert_eq!(name, "draft_ready", "{events:?}");
    data["document_id"].as_str().unwrap().to_string()
}

/// Sends a chat message and returns its events.
pub async fn chat(app: &Router, token: &str, doc: &str, message: &str) -> Vec<(String, Value)> {
    let reply = post(app, &format!("/plans/{doc}/chat"), Some(token), json!({ "message": message })).await;
    assert_eq!(reply.status, StatusCode::OK, "{}", reply.text());
    reply.events()
}

pub fn final_of(events: &[(String, Value)]) -> &Value {
    let finals: Vec<_> = events.iter().filter(|(n, _)| n == "final").collect();
    assert_eq!(finals.len(), 1, "{events:?}");
    assert_eq!(events.last().unwrap().0, "final");
    &finals[0].1
}
