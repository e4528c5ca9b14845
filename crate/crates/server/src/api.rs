//! Routes, request bodies and SSE framing.

use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Multipart, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use bizchat_core::export::{export_html, export_markdown};
use bizchat_core::generator::{generate_draft, GenerateError};
use bizchat_core::ingest::{check_url, context_from_chat, context_from_page, TranscriptTurn};
use bizchat_core::model::{to_canonical_json, Author, BusinessContext, DocumentMeta, Goal, PlanDocument, RichText, SectionId};
use bizchat_core::pitch::{list_experts, prepare_pitch};
use bizchat_core::suggest::{
    apply_edit, exchange_turns, inline_generate, propose_edit_streaming, suggest_prompts, tooltip_questions,
    user_turn, InlineRequest,
};
use futures::{Stream, StreamExt};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::mpsc;
use tokio_stream::wrappers::UnboundedReceiverStream;

use crate::error::ApiError;
use crate::state::{Account, AppState, DocSlot, LiveDoc};

type App = State<Arc<AppState>>;

const AUDIO_LIMIT: usize = 25 * 1024 * 1024;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/auth/token", post(issue_token))
        .route("/onboard/website", post(onboard_website))
        .route("/onboard/chat", post(onboard_chat))
        .route("/plans", get(list_plans))
        .route("/plans/{id}", get(get_plan))
        .route("/plans/{id}/export", get(export))
        .route("/plans/{id}/conversation", get(conversation))
        .route("/plans/{id}/chat", post(chat))
        .route("/plans/{id}/suggestions", get(suggestions))
        .route("/plans/{id}/apply", post(apply))
        .route("/plans/{id}/sections/{section_id}/edit", post(edit_section))
        .route("/plans/{id}/inline", post(inline))
        .route("/plans/{id}/pitch-prep", post(pitch_prep))
        .route("/experts", get(experts))
        .route("/transcribe", post(transcribe).layer(DefaultBodyLimit::max(AUDIO_LIMIT)))
        .route("/sections/{section_id}/tooltips", get(tooltips))
        .route("/sections/{section_id}/exemplars", get(exemplars))
        .fallback(|| async { ApiError::NotFound("no such endpoint".into()) })
        .with_state(state)
}

/// Canonical JSON response.
fn canonical<T: Serialize + ?Sized>(status: StatusCode, value: &T) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], to_canonical_json(value)).into_response()
}

fn interchange(plan: &PlanDocument) -> Response {
    (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], plan.to_interchange()).into_response()
}

/// JSON request body whose rejections use the service's error shape.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match axum::Json::<T>::from_request(req, state).await {
            Ok(axum::Json(value)) => Ok(Body(value)),
            Err(rejection) => Err(ApiError::invalid("invalid_body", rejection.body_text())),
        }
    }
}

fn bearer(parts: &Parts) -> Option<&str> {
    let value = parts.headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim()).filter(|t| !t.is_empty())
}

/// The authenticated account.
pub struct Caller(pub Account);

impl FromRequestParts<Arc<AppState>> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &Arc<AppState>) -> Result<Self, Self::Rejection> {
        let token = bearer(parts).ok_or(ApiError::Unauthorized)?;
        state.authenticate(token).map(Caller).ok_or(ApiError::Unauthorized)
    }
}

fn owned(app: &AppState, caller: &Caller, id: &str) -> Result<Arc<LiveDoc>, ApiError> {
    match app.document(id) {
        None => Err(ApiError::NotFound(format!("no document `{id}`"))),
        Some(DocSlot::Corrupt(_)) => Err(ApiError::StorageCorrupt),
        Some(DocSlot::Live(doc)) if doc.plan().owner() != caller.0.account_id => Err(ApiError::Forbidden),
        Some(DocSlot::Live(doc)) => Ok(doc),
    }
}

fn section_param(raw: &str) -> Result<SectionId, ApiError> {
    raw.parse().map_err(|_| ApiError::NotFound(format!("no section `{raw}`")))
}

// ---- SSE ----

fn event(name: &str, data: &Value) -> Event {
    Event::default().event(name).data(to_canonical_json(data))
}

type Events = mpsc::UnboundedSender<Event>;

/// Runs `work` as the body of an event stream. Dropping the stream (the
/// client went away) drops `work` with it.
fn event_stream<F>(work: impl FnOnce(Events) -> F) -> impl Stream<Item = Result<Event, Infallible>>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    let (tx, rx) = mpsc::unbounded_channel();
    let work = work(tx);
    let events = UnboundedReceiverStream::new(rx).map(Some);
    let done = futures::stream::once(work).map(|()| None);
    futures::stream::select(events, done).filter_map(|e| async move { e.map(Ok) })
}

// ---- auth ----

#[derive(Deserialize, Default)]
struct TokenRequest {
    #[serde(default)]
    display_name: Option<String>,
}

async fn issue_token(State(app): App, request: Request) -> Result<Response, ApiError> {
    let (parts, body) = request.into_parts();
    let presented = bearer(&parts).ok_or(ApiError::Unauthorized)?.to_string();
    if !app.bootstrap_matches(&presented) {
        return Err(ApiError::Unauthorized);
    }
    let bytes = axum::body::to_bytes(body, 64 * 1024).await.map_err(|e| ApiError::invalid("invalid_body", e.to_string()))?;
    let req: TokenRequest = if bytes.iter().all(u8::is_ascii_whitespace) {
        TokenRequest::default()
    } else {
        serde_json::from_slice(&bytes).map_err(|e| ApiError::invalid("invalid_body", e.to_string()))?
    };
    let name = req.display_name.filter(|n| !n.trim().is_empty()).unwrap_or_else(|| "Owner".into());
    let (account, token) = app.issue_account(name.trim())?;
    Ok(canonical(StatusCode::CREATED, &json!({"account": account, "token": token})))
}

// ---- onboarding ----

#[derive(Deserialize)]
struct GoalInput {
    #[serde(default)]
    id: Option<String>,
    label: String,
    #[serde(default)]
    detail: String,
}

fn goals_from(input: Vec<GoalInput>) -> Result<Vec<Goal>, ApiError> {
    let goals: Vec<Goal> = input
        .into_iter()
        .enumerate()
        .map(|(i, g)| Goal::new(g.id.unwrap_or_else(|| format!("goal-{}", i + 1)), g.label.trim(), g.detail.trim()))
        .collect();
    for (i, goal) in goals.iter().enumerate() {
        if goal.label.is_empty() {
            return Err(ApiError::invalid("invalid_goal", format!("goal {} has an empty label", i + 1)));
        }
        if goals[..i].iter().any(|g| g.id == goal.id) {
            return Err(ApiError::invalid("invalid_goal", format!("duplicate goal id `{}`", goal.id)));
        }
    }
    Ok(goals)
}

#[derive(Deserialize)]
struct WebsiteOnboard {
    url: String,
    #[serde(default)]
    goals: Vec<GoalInput>,
}

#[derive(Deserialize)]
struct ChatOnboard {
    transcript: Vec<TranscriptTurn>,
    #[serde(default)]
    goals: Vec<GoalInput>,
}

enum Source {
    Website(String),
    Chat(Vec<TranscriptTurn>),
}

async fn onboard_website(State(app): App, caller: Caller, Body(req): Body<WebsiteOnboard>) -> Result<Response, ApiError> {
    let goals = goals_from(req.goals)?;
    check_url(&req.url)?;
    Ok(onboard(app, caller.0, goals, Source::Website(req.url)))
}

async fn onboard_chat(State(app): App, caller: Caller, Body(req): Body<ChatOnboard>) -> Result<Response, ApiError> {
    let goals = goals_from(req.goals)?;
    if req.transcript.iter().all(|t| t.text.trim().is_empty()) {
        return Err(ApiError::invalid("empty_input", "the transcript has no text"));
    }
    Ok(onboard(app, caller.0, goals, Source::Chat(req.transcript)))
}

fn generate_error(e: GenerateError) -> ApiError {
    match e {
        GenerateError::SectionGenerationFailed { cause, .. } => cause.into(),
        GenerateError::PartialParse(_) => ApiError::Provider { cause: "unusable_reply", message: e.to_string() },
        GenerateError::NoExemplar(_) => ApiError::Storage(e.to_string()),
        GenerateError::Model(m) => m.into(),
    }
}

async fn build_context(app: &AppState, source: &Source, document_id: &str) -> Result<BusinessContext, ApiError> {
    Ok(match source {
        Source::Website(url) => {
            let page = app.pages.fetch_and_strip(url, app.clock.as_ref()).await?;
            context_from_page(&app.gateway, &page).await?
        }
        Source::Chat(transcript) => context_from_chat(&app.gateway, &format!("onboard-{document_id}"), transcript).await?,
    })
}

/// 202 with `section_done` per section, then `draft_ready`; nothing is
/// stored unless the whole draft succeeds.
fn onboard(app: Arc<AppState>, owner: Account, goals: Vec<Goal>, source: Source) -> Response {
    let stream = event_stream(move |tx| async move {
        let document_id = app.allocate_document_id();
        let result = async {
            let context = build_context(&app, &source, &document_id).await?;
            let meta = DocumentMeta { document_id: document_id.clone(), owner: owner.account_id, created_at: app.clock.now() };
            let progress = |section: SectionId| {
                let _ = tx.send(event("section_done", &json!({"section_id": section})));
            };
            let plan = generate_draft(&app.gateway, &app.corpus, &context, &goals, meta, &progress)
                .await
                .map_err(generate_error)?;
            app.create_document(plan)?;
            Ok::<_, ApiError>(())
        }
        .await;
        let _ = match result {
            Ok(()) => tx.send(event("draft_ready", &json!({"document_id": document_id}))),
            Err(e) => tx.send(event("error", &e.event_payload())),
        };
    });
    (StatusCode::ACCEPTED, Sse::new(stream)).into_response()
}

// ---- plans ----

async fn list_plans(State(app): App, caller: Caller) -> Response {
    let plans: Vec<Value> = app
        .documents_of(&caller.0.account_id)
        .iter()
        .map(|p| json!({"document_id": p.document_id(), "business_name": p.context().business_name, "head": p.head()}))
        .collect();
    canonical(StatusCode::OK, &plans)
}

async fn get_plan(State(app): App, caller: Caller, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(interchange(&owned(&app, &caller, &id)?.plan()))
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn export(
    State(app): App,
    caller: Caller,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let plan = owned(&app, &caller, &id)?.plan();
    let (bytes, content_type) = match q.format.as_deref().unwrap_or("md") {
        "md" => (export_markdown(&plan), "text/markdown; charset=utf-8"),
        "html" => (export_html(&plan), "text/html; charset=utf-8"),
        other => return Err(ApiError::invalid("invalid_format", format!("unknown export format `{other}`"))),
    };
    let file = format!("attachment; filename=\"{}.{}\"", plan.document_id(), q.format.as_deref().unwrap_or("md"));
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, content_type.to_string()), (header::CONTENT_DISPOSITION, file)], bytes)
        .into_response())
}

async fn conversation(State(app): App, caller: Caller, Path(id): Path<String>) -> Result<Response, ApiError> {
    let doc = owned(&app, &caller, &id)?;
    let turns = doc.conversation();
    Ok(canonical(
        StatusCode::OK,
        &json!({"conversation_id": format!("conv-{id}"), "document_id": id, "turns": *turns}),
    ))
}

// ---- chat and edits ----

#[derive(Deserialize)]
struct ChatRequest {
    message: String,
}

/// `delta` events with the reply prose, then exactly one `final` event.
/// A provider failure adds an `error` event before `final`.
async fn chat(
    State(app): App,
    caller: Caller,
    Path(id): Path<String>,
    Body(req): Body<ChatRequest>,
) -> Result<Response, ApiError> {
    let doc = owned(&app, &caller, &id)?;
    let message = req.message.trim().to_string();
    if message.is_empty() {
        return Err(ApiError::invalid("invalid_request", "message must not be empty"));
    }
    let plan = doc.plan();
    let prior = doc.conversation();
    let stream = event_stream(move |tx| async move {
        let deltas = tx.clone();
        let mut sink = move |chunk: &str| {
            let _ = deltas.send(event("delta", &json!({"text": chunk})));
        };
        let (turns, proposals) = match propose_edit_streaming(&app.gateway, &message, &prior, &plan, &mut sink).await {
            Ok(outcome) => (exchange_turns(&prior, &message, &outcome).to_vec(), outcome.proposals),
            Err(e) => {
                let _ = tx.send(event("error", &ApiError::from(e).event_payload()));
                (vec![user_turn(&prior, &plan, &message)], Vec::new())
            }
        };
        let after = match doc.record_exchange(turns.clone(), &proposals).await {
            Ok(conversation) => conversation.to_vec(),
            Err(e) => {
                let _ = tx.send(event("error", &ApiError::from(e).event_payload()));
                prior.iter().cloned().chain(turns).collect()
            }
        };
        let suggestions = suggest_prompts(&app.gateway, &after, &plan).await;
        let _ = tx.send(event("final", &json!({"proposals": proposals, "suggestions": suggestions})));
    });
    Ok(Sse::new(stream).into_response())
}

/// The two prompt chips for the current conversation and head.
async fn suggestions(State(app): App, caller: Caller, Path(id): Path<String>) -> Result<Response, ApiError> {
    let doc = owned(&app, &caller, &id)?;
    let pair = suggest_prompts(&app.gateway, &doc.conversation(), &doc.plan()).await;
    Ok(canonical(StatusCode::OK, &pair))
}

#[derive(Deserialize)]
struct ApplyRequest {
    proposal_id: String,
}

async fn apply(
    State(app): App,
    caller: Caller,
    Path(id): Path<String>,
    Body(req): Body<ApplyRequest>,
) -> Result<Response, ApiError> {
    let doc = owned(&app, &caller, &id)?;
    let proposal = doc
        .proposal(&req.proposal_id)
        .ok_or_else(|| ApiError::NotFound(format!("no proposal `{}`", req.proposal_id)))?;
    let at = app.clock.now();
    let plan = doc.commit(|plan| apply_edit(plan, &proposal, at)).await?;
    Ok(interchange(&plan))
}

#[derive(Deserialize)]
struct EditRequest {
    replacement: RichText,
    /// When present, the edit is refused unless the head still equals it.
    #[serde(default)]
    base_revision: Option<u64>,
}

async fn edit_section(
    State(app): App,
    caller: Caller,
    Path((id, section)): Path<(String, String)>,
    Body(req): Body<EditRequest>,
) -> Result<Response, ApiError> {
    let doc = owned(&app, &caller, &id)?;
    let section = section_param(&section)?;
    let at = app.clock.now();
    let plan = doc
        .commit(|plan| {
            if req.base_revision.is_some_and(|base| base != plan.head()) {
                return Err(ApiError::Stale { head: plan.head() });
            }
            plan.edit_section(section, req.replacement, Author::User, at).map_err(ApiError::from)
        })
        .await?;
    Ok(interchange(&plan))
}

async fn inline(
    State(app): App,
    caller: Caller,
    Path(id): Path<String>,
    Body(req): Body<InlineRequest>,
) -> Result<Response, ApiError> {
    let plan = owned(&app, &caller, &id)?.plan();
    let result = inline_generate(&app.gateway, &app.corpus, &req, &plan).await?;
    Ok(canonical(StatusCode::OK, &result))
}

#[derive(Deserialize)]
struct PitchRequest {
    goal_id: String,
}

async fn pitch_prep(
    State(app): App,
    caller: Caller,
    Path(id): Path<String>,
    Body(req): Body<PitchRequest>,
) -> Result<Response, ApiError> {
    let plan = owned(&app, &caller, &id)?.plan();
    let prep = prepare_pitch(&app.gateway, &plan, &req.goal_id, app.clock.now()).await?;
    Ok(canonical(StatusCode::OK, &prep))
}

// ---- reference data and transcription ----

#[derive(Deserialize)]
struct ExpertQuery {
    #[serde(default)]
    focus: Option<String>,
}

async fn experts(State(app): App, Query(q): Query<ExpertQuery>) -> Result<Response, ApiError> {
    let focus = q.focus.as_deref().filter(|f| !f.is_empty()).map(section_param).transpose()?;
    Ok(canonical(StatusCode::OK, &list_experts(&app.corpus, focus)))
}

async fn tooltips(State(app): App, Path(section): Path<String>) -> Result<Response, ApiError> {
    let section = section_param(&section)?;
    Ok(canonical(
        StatusCode::OK,
        &json!({"section_id": section, "questions": tooltip_questions(&app.corpus, section)}),
    ))
}

async fn exemplars(State(app): App, Path(section): Path<String>) -> Result<Response, ApiError> {
    let section = section_param(&section)?;
    Ok(canonical(StatusCode::OK, app.corpus.exemplars(section)))
}

/// Multipart upload; the first part with a content type is the audio.
async fn transcribe(State(app): App, _caller: Caller, mut form: Multipart) -> Result<Response, ApiError> {
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::invalid("invalid_body", e.body_text());
    while let Some(field) = form.next_field().await.map_err(bad)? {
        let Some(media_type) = field.content_type().map(|m| m.split(';').next().unwrap_or(m).trim().to_string()) else {
            continue;
        };
        let audio = field.bytes().await.map_err(bad)?;
        let text = app.gateway.transcribe(&audio, &media_type).await?;
        return Ok(canonical(StatusCode::OK, &json!({"text": text})));
    }
    Err(ApiError::invalid("invalid_request", "no audio part in the upload"))
}
