mod common;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use bizchat_core::export::export_markdown;
use bizchat_core::model::SectionId;
use bizchat_core::testing::{coffee, fixture_dir, golden_dir};
use common::*;
use serde_json::{json, Value};

fn golden(name: &str) -> Vec<u8> {
    std::fs::read(golden_dir().join(name)).unwrap()
}

#[tokio::test]
async fn empty_data_directory_serves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let token = account(&app, "José").await;
    let plans = get(&app, "/plans", Some(&token)).await;
    assert_eq!(plans.json(), json!([]));
    assert_eq!(get(&app, "/plans/doc-000001", Some(&token)).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn authentication_and_ownership() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());

    assert_eq!(post(&app, "/auth/token", None, json!({})).await.status, StatusCode::UNAUTHORIZED);
    assert_eq!(post(&app, "/auth/token", Some("guess"), json!({})).await.status, StatusCode::UNAUTHORIZED);

    let issued = post(&app, "/auth/token", Some(BOOTSTRAP), json!({"display_name": "José"})).await;
    let body = issued.json();
    assert_eq!(body["account"], json!({"account_id": "acct-000001", "display_name": "José"}));
    assert!(!issued.text().contains("hash"));
    let owner = body["token"].as_str().unwrap().to_string();
    let other = account(&app, "Someone else").await;

    let no_auth = post(&app, "/onboard/website", None, json!({"url": coffee::URL})).await;
    assert_eq!(no_auth.status, StatusCode::UNAUTHORIZED);
    assert_eq!(no_auth.json()["error"], "unauthorized");
    assert_eq!(get(&app, "/plans", Some("bogus")).await.status, StatusCode::UNAUTHORIZED);

    let doc = onboard_coffee(&app, &owner).await;
    let path = format!("/plans/{doc}");
    assert_eq!(get(&app, &path, Some(&other)).await.status, StatusCode::FORBIDDEN);
    let chat = post(&app, &format!("{path}/chat"), Some(&other), json!({"message": "hi"})).await;
    assert_eq!(chat.status, StatusCode::FORBIDDEN);
    assert_eq!(chat.json()["error"], "forbidden");
    assert_eq!(get(&app, &path, Some(&owner)).await.status, StatusCode::OK);
    assert_eq!(get(&app, "/plans", Some(&other)).await.json(), json!([]));
}

#[tokio::test]
async fn website_onboarding_reproduces_the_golden_draft() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let token = account(&app, "José").await;
    let reply = post(&app, "/onboard/website", Some(&token), json!({"url": coffee::URL, "goals": coffee_goals()})).await;
    assert_eq!(reply.status, StatusCode::ACCEPTED);
    assert!(reply.headers[header::CONTENT_TYPE].to_str().unwrap().starts_with("text/event-stream"));

    let events = reply.events();
    assert_eq!(events.len(), 10);
    let mut done: Vec<SectionId> = events[..9]
        .iter()
        .map(|(name, data)| {
            assert_eq!(name, "section_done");
            data["section_id"].as_str().unwrap().parse().unwrap()
        })
        .collect();
    done.sort();
    assert_eq!(done, SectionId::ALL);
    assert_eq!(events[9], ("draft_ready".to_string(), json!({"document_id": coffee::DOCUMENT_ID})));

    let plan = get(&app, "/plans/doc-000001", Some(&token)).await;
    assert_eq!(plan.headers[header::CONTENT_TYPE], "application/json");
    assert_eq!(plan.body, golden("drafts/coffee.json"));

    let md = get(&app, "/plans/doc-000001/export?format=md", Some(&token)).await;
    assert_eq!(md.headers[header::CONTENT_TYPE], "text/markdown; charset=utf-8");
    assert_eq!(md.body, golden("export/coffee.md"));
    let html = get(&app, "/plans/doc-000001/export?format=html", Some(&token)).await;
    assert_eq!(html.headers[header::CONTENT_TYPE], "text/html; charset=utf-8");
    assert_eq!(html.body, golden("export/coffee.html"));
    let bad = get(&app, "/plans/doc-000001/export?format=docx", Some(&token)).await;
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);

    let listed = get(&app, "/plans", Some(&token)).await.json();
    assert_eq!(listed, json!([{"business_name": "Three Rivers Roasting Co.", "document_id": "doc-000001", "head": 0}]));
}

#[tokio::test]
async fn onboarding_failures() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let token = account(&app, "José").await;

    let bad_url = post(&app, "/onboard/website", Some(&token), json!({"url": "ftp://x"})).await;
    assert_eq!(bad_url.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(bad_url.json()["error"], "invalid_url");
    let bad_goal = post(&app, "/onboard/website", Some(&token), json!({"url": coffee::URL, "goals": [{"label": " "}]})).await;
    assert_eq!(bad_goal.json()["error"], "invalid_goal");
    let malformed = post(&app, "/onboard/website", Some(&token), json!({"goals": []})).await;
    assert_eq!(malformed.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(malformed.json()["error"], "invalid_body");

    // Prose-only extraction replies: an error event and no document.
    let prose = post(&app, "/onboard/website", Some(&token), json!({"url": "https://welcome.example/"})).await;
    assert_eq!(prose.status, StatusCode::ACCEPTED);
    let events = prose.events();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].0, "error");
    assert_eq!(events[0].1["code"], "provider_failure");
    assert_eq!(events[0].1["cause"], "unusable_reply");

    let missing = post(&app, "/onboard/website", Some(&token), json!({"url": "https://nowhere.example/"})).await;
    assert_eq!(missing.events()[0].1["code"], "fetch_failed");
    assert_eq!(get(&app, "/plans", Some(&token)).await.json(), json!([]));
}

#[tokio::test]
async fn chat_onboarding_needs_a_draft_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let token = account(&app, "José").await;
    let empty = post(&app, "/onboard/chat", Some(&token), json!({"transcript": [{"role": "user", "text": "  "}]})).await;
    assert_eq!(empty.json()["error"], "empty_input");

    // Extraction is recorded for this message but no draft is, so the
    // stream reports the miss instead of hanging or storing a document.
    let body = json!({"transcript": [{"role": "user", "text": "I roast coffee in Pittsburgh"}]});
    let reply = post(&app, "/onboard/chat", Some(&token), body).await;
    let events = reply.events();
    let (name, data) = events.last().unwrap();
    assert_eq!(name, "error");
    assert_eq!(data["cause"], "fixture_miss");
    assert!(!reply.text().contains(&fixture_dir().display().to_string()));
}

fn proposal_ids(final_event: &Value) -> Vec<String> {
    final_event["proposals"].as_array().unwrap().iter().map(|p| p["proposal_id"].as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn chat_stream_apply_and_stale_apply() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let token = account(&app, "José").await;
    let doc = onboard_coffee(&app, &token).await;

    let fresh = get(&app, &format!("/plans/{doc}/suggestions"), Some(&token)).await.json();
    assert_eq!(fresh.as_array().unwrap().len(), 2);
    assert_eq!(fresh[0]["kind"], "exploitation");
    assert_eq!(fresh[1]["kind"], "exploration");

    let events = chat(&app, &token, &doc, coffee::FIX_MESSAGE).await;
    let deltas: String = events.iter().filter(|(n, _)| n == "delta").map(|(_, d)| d["text"].as_str().unwrap()).collect();
    assert!(deltas.contains("2022") && !deltas.contains("PROPOSAL"), "{deltas}");
    let last = final_of(&events);
    assert_eq!(last["suggestions"].as_array().unwrap().len(), 2);
    let ids = proposal_ids(last);
    assert_eq!(ids.len(), 1);
    assert_eq!(last["proposals"][0]["target_section"], "executive_summary");
    assert_eq!(last["proposals"][0]["base_revision"], 0);

    let applied = post(&app, &format!("/plans/{doc}/apply"), Some(&token), json!({"proposal_id": ids[0]})).await;
    assert_eq!(applied.status, StatusCode::OK);
    let plan = applied.json();
    assert_eq!(plan["head"], 1);
    assert_eq!(plan["revisions"][1]["author"], "assistant");
    assert_eq!(plan["revisions"][1]["change"], json!({"kind": "section_replace", "section_id": "executive_summary"}));

    let stale = post(&app, &format!("/plans/{doc}/apply"), Some(&token), json!({"proposal_id": ids[0]})).await;
    assert_eq!(stale.status, StatusCode::CONFLICT);
    assert_eq!(stale.json()["error"], "stale_proposal");
    assert_eq!(stale.json()["head"], 1);

    let unknown = post(&app, &format!("/plans/{doc}/apply"), Some(&token), json!({"proposal_id": "prop-nope"})).await;
    assert_eq!(unknown.status, StatusCode::NOT_FOUND);

    // Second turn against the new head, then the voice note.
    let events = chat(&app, &token, &doc, coffee::MARKET_MESSAGE).await;
    let ids = proposal_ids(final_of(&events));
    let applied = post(&app, &format!("/plans/{doc}/apply"), Some(&token), json!({"proposal_id": ids[0]})).await;
    assert_eq!(applied.json()["head"], 2);

    let audio = std::fs::read(fixture_dir().join(coffee::VOICE_FILE)).unwrap();
    let boundary = "XBOUNDARYX";
    let mut upload = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"audio\"; filename=\"{}\"\r\nContent-Type: audio/webm\r\n\r\n",
        coffee::VOICE_FILE
    )
    .into_bytes();
    upload.extend_from_slice(&audio);
    upload.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    let request = Request::builder()
        .method(Method::POST)
        .uri("/transcribe")
        .header(header::AUTHORIZATION, format!("Bearer {token}"))
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(upload))
        .unwrap();
    let transcribed = send(&app, request).await;
    assert_eq!(transcribed.status, StatusCode::OK, "{}", transcribed.text());
    let text = transcribed.json()["text"].as_str().unwrap().to_string();
    assert_eq!(text, coffee::VOICE_TEXT);

    let events = chat(&app, &token, &doc, &text).await;
    let last = final_of(&events);
    assert!(proposal_ids(last).is_empty());
    assert!(!last["suggestions"][0]["text"].as_str().unwrap().starts_with("Tell me more"));

    let conversation = get(&app, &format!("/plans/{doc}/conversation"), Some(&token)).await.json();
    let turns = conversation["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 6);
    assert!(turns.iter().enumerate().all(|(i, t)| t["turn_index"] == i));
    assert_eq!(turns[4]["focus_section"], "company_description");
}

#[tokio::test]
async fn provider_failure_still_ends_with_final() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let token = account(&app, "José").await;
    let doc = onboard_coffee(&app, &token).await;

    let events = chat(&app, &token, &doc, "what should my appendix include?").await;
    let errors: Vec<_> = events.iter().filter(|(n, _)| n == "error").collect();
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0].1["code"], "provider_failure");
    let last = final_of(&events);
    assert_eq!(last["proposals"], json!([]));
    let suggestions = last["suggestions"].as_array().unwrap();
    assert_eq!(suggestions.len(), 2);
    assert_eq!(suggestions[0]["kind"], "exploitation");
    assert_eq!(suggestions[0]["target_section"], "appendix");
    assert_ne!(suggestions[1]["target_section"], "appendix");

    let turns = get(&app, &format!("/plans/{doc}/conversation"), Some(&token)).await.json()["turns"].clone();
    assert_eq!(turns.as_array().unwrap().len(), 1);
    assert_eq!(turns[0]["role"], "user");

    let empty = post(&app, &format!("/plans/{doc}/chat"), Some(&token), json!({"message": "   "})).await;
    assert_eq!(empty.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn manual_edits() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let token = account(&app, "José").await;
    let doc = onboard_coffee(&app, &token).await;
    let path = format!("/plans/{doc}/sections/appendix/edit");
    let replacement = json!({"blocks": [{"type": "paragraph", "inlines": [{"text": "Roaster quote attached.", "marks": []}]}]});

    let edited = post(&app, &path, Some(&token), json!({"replacement": replacement})).await;
    assert_eq!(edited.status, StatusCode::OK, "{}", edited.text());
    let plan = edited.json();
    assert_eq!(plan["head"], 1);
    assert_eq!(plan["revisions"][1]["author"], "user");

    let same = post(&app, &path, Some(&token), json!({"replacement": replacement})).await;
    assert_eq!(same.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(same.json()["error"], "no_change");

    let stale = post(&app, &path, Some(&token), json!({"replacement": {"blocks": []}, "base_revision": 0})).await;
    assert_eq!(stale.status, StatusCode::CONFLICT);
    assert_eq!(stale.json()["head"], 1);

    let bad_level = json!({"replacement": {"blocks": [{"type": "heading", "level": 4, "inlines": [{"text": "x", "marks": []}]}]}});
    let invalid = post(&app, &path, Some(&token), bad_level).await;
    assert_eq!(invalid.status, StatusCode::UNPROCESSABLE_ENTITY);

    let unknown = post(&app, &format!("/plans/{doc}/sections/cover_page/edit"), Some(&token), json!({"replacement": replacement})).await;
    assert_eq!(unknown.status, StatusCode::NOT_FOUND);

    let md = get(&app, &format!("/plans/{doc}/export?format=md"), Some(&token)).await;
    assert!(md.text().contains("# Appendix\n\nRoaster quote attached.\n"));
    assert!(md.text().contains("head=1"));
}

#[tokio::test]
async fn inline_pitch_and_reference_data() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let token = account(&app, "José").await;
    let doc = onboard_coffee(&app, &token).await;

    let inline = post(
        &app,
        &format!("/plans/{doc}/inline"),
        Some(&token),
        json!({"section_id": "market_analysis", "criteria": coffee::INLINE_CRITERIA, "cursor_block": 1}),
    )
    .await;
    assert_eq!(inline.status, StatusCode::OK, "{}", inline.text());
    let body = inline.json();
    assert!(!body["candidates"].as_array().unwrap().is_empty());
    assert!(!body["exemplars"].as_array().unwrap().is_empty());
    let empty = post(
        &app,
        &format!("/plans/{doc}/inline"),
        Some(&token),
        json!({"section_id": "market_analysis", "criteria": "", "cursor_block": 1}),
    )
    .await;
    assert_eq!(empty.status, StatusCode::UNPROCESSABLE_ENTITY);

    let pitch = post(&app, &format!("/plans/{doc}/pitch-prep"), Some(&token), json!({"goal_id": "goal-grant"})).await;
    let questions = pitch.json()["questions"].as_array().unwrap().clone();
    assert!((5..=8).contains(&questions.len()));
    assert!(questions.iter().any(|q| q.as_str().unwrap().to_lowercase().contains("funding")));
    assert_eq!(pitch.json()["head_at_generation"], 0);
    let unknown = post(&app, &format!("/plans/{doc}/pitch-prep"), Some(&token), json!({"goal_id": "goal-x"})).await;
    assert_eq!(unknown.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(unknown.json()["error"], "unknown_goal");

    assert_eq!(get(&app, "/experts", None).await.json().as_array().unwrap().len(), 3);
    let funding = get(&app, "/experts?focus=funding_request", None).await.json();
    assert!(funding.as_array().unwrap().iter().all(|e| e["focus_areas"].to_string().contains("funding_request")));
    assert_eq!(get(&app, "/experts?focus=appendix", None).await.json(), json!([]));
    assert_eq!(get(&app, "/experts?focus=nope", None).await.status, StatusCode::NOT_FOUND);

    let tips = get(&app, "/sections/financial_projections/tooltips", None).await.json();
    assert_eq!(tips["questions"].as_array().unwrap().len(), 5);
    let examples = get(&app, "/sections/market_analysis/exemplars", None).await.json();
    assert_eq!(examples.as_array().unwrap().len(), 3);
    assert_eq!(get(&app, "/sections/nope/exemplars", None).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn transcription_rejects_unknown_media() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let token = account(&app, "José").await;
    let boundary = "B";
    let upload = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"audio\"; filename=\"a.txt\"\r\nContent-Type: text/plain\r\n\r\nhello\r\n--{boundary}--\r\n"
    );
    let request = Request::builder()
        .method(Method::POST)
        .uri("/transcribe")
        .header(header::AUTHORIZATION, format!("Bearer {token}"))
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(upload))
        .unwrap();
    let reply = send(&app, request).await;
    assert_eq!(reply.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(reply.json()["error"], "unsupported_media");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_applies_serialize() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let token = account(&app, "José").await;
    let doc = onboard_coffee(&app, &token).await;
    let events = chat(&app, &token, &doc, coffee::FIX_MESSAGE).await;
    let id = proposal_ids(final_of(&events))[0].clone();

    let attempts = (0..16).map(|_| {
        let app = app.clone();
        let token = token.clone();
        let path = format!("/plans/{doc}/apply");
        let id = id.clone();
        tokio::spawn(async move { post(&app, &path, Some(&token), json!({ "proposal_id": id })).await })
    });
    let replies = futures::future::join_all(attempts).await;
    let statuses: Vec<StatusCode> = replies.iter().map(|r| r.as_ref().unwrap().status).collect();
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1);
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::CONFLICT).count(), 15);

    let plan = get(&app, &format!("/plans/{doc}"), Some(&token)).await.json();
    assert_eq!(plan["head"], 1);
    let md = get(&app, &format!("/plans/{doc}/export"), Some(&token)).await;
    let core_md = {
        let reopened = bizchat_server::AppState::open(dir.path(), services()).unwrap();
        let bizchat_server::state::DocSlot::Live(live) = reopened.document(&doc).unwrap() else { panic!() };
        export_markdown(&live.plan())
    };
    assert_eq!(md.body, core_md);
}

#[tokio::test]
async fn unknown_routes_are_json_404() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let reply = get(&app, "/nope", None).await;
    assert_eq!(reply.status, StatusCode::NOT_FOUND);
    assert_eq!(reply.json()["error"], "not_found");
}
