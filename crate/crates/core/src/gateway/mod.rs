//! Provider-agnostic access to chat completion and transcription.
//!
//! A [`Gateway`] resolves each request's route to a model, enforces request
//! and response invariants, and wraps a [`LlmBackend`] with retries and a
//! per-route wall-clock budget. Backends: [`OpenAiBackend`] (live, any
//! OpenAI-compatible endpoint), [`FixtureBackend`] (offline replay keyed by
//! canonical request hash) and [`RecordingBackend`] (live calls captured
//! into fixtures).

mod fixture;
mod openai;
mod types;

use std::collections::BTreeMap;
use std::env;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;

pub use fixture::{Fixture, FixtureBackend, FixtureStore, RecordingBackend};
pub use openai::OpenAiBackend;
pub use types::{
    audio_key, sha256_hex, CanonicalRequest, FinishReason, Message, ProviderRequest, ProviderResponse, Role,
    Route, Usage, SUPPORTED_AUDIO,
};

/// Size of each increment when a fixture is replayed as a stream.
pub const MOCK_CHUNK_CHARS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("{route} call exceeded its {}s budget", .budget.as_secs())]
    Timeout { route: Route, budget: Duration },
    #[error("provider error{}: {message}", .status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Provider { status: Option<u16>, message: String },
    #[error("no replay fixture for request hash {key}")]
    FixtureMiss { key: String },
    #[error("unsupported media type `{0}`")]
    UnsupportedMedia(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gateway misconfigured: {0}")]
    Config(String),
}

impl GatewayError {
    /// Rate limits, server errors and transport failures are worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::Provider { status: None, .. } => true,
            GatewayError::Provider { status: Some(s), .. } => *s == 429 || *s >= 500,
            _ => false,
        }
    }

    /// Short machine-readable cause for API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::Timeout { .. } => "timeout",
            GatewayError::Provider { .. } => "provider_error",
            GatewayError::FixtureMiss { .. } => "fixture_miss",
            GatewayError::UnsupportedMedia(_) => "unsupported_media",
            GatewayError::InvalidRequest(_) => "invalid_request",
            GatewayError::Config(_) => "config",
        }
    }
}

pub type TextSink<'a> = dyn FnMut(&str) + Send + 'a;

/// A concrete provider. Implementations do no retrying of their own.
#[async_trait]
pub trait LlmBackend: Send + Sync {
    async fn complete(&self, model: &str, request: &ProviderRequest) -> Result<ProviderResponse, GatewayError>;

    /// Streams increments into `sink`. An error after at least one increment
    /// should be reported as a response with `FinishReason::Error` carrying
    /// the partial content.
    async fn complete_stream(
        &self,
        model: &str,
        request: &ProviderRequest,
        sink: &mut TextSink<'_>,
    ) -> Result<ProviderResponse, GatewayError>;

    async fn transcribe(&self, model: &str, audio: &[u8], media_type: &str) -> Result<String, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Live,
    Mock,
    Record,
}

impl std::str::FromStr for Mode {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Mode::Live),
            "mock" => Ok(Mode::Mock),
            "record" => Ok(Mode::Record),
            other => Err(GatewayError::Config(format!("LLM_MODE must be live, mock or record, got `{other}`"))),
        }
    }
}

/// Model identifier per route.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRouting {
    models: BTreeMap<Route, String>,
}

impl Default for ModelRouting {
    fn default() -> Self {
        let models = [
            (Route::Chat, "gpt-3.5-turbo"),
            (Route::WebsiteSummary, "gpt-3.5-turbo"),
            (Route::PitchPrep, "gpt-3.5-turbo"),
            (Route::Suggestions, "gpt-4o-mini"),
            (Route::SectionGeneration, "gpt-4-turbo"),
            (Route::Transcription, "whisper-1"),
        ]
        .into_iter()
        .map(|(r, m)| (r, m.to_string()))
        .collect();
        ModelRouting { models }
    }
}

impl ModelRouting {
    /// Defaults with `LLM_MODEL_*` overrides applied. `LLM_MODEL_CHAT`
    /// covers the whole chat family (chat, website summaries, pitch prep).
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Self {
        let mut routing = ModelRouting::default();
        let overrides: [(&str, &[Route]); 4] = [
            ("LLM_MODEL_CHAT", &[Route::Chat, Route::WebsiteSummary, Route::PitchPrep]),
            ("LLM_MODEL_SECTION", &[Route::SectionGeneration]),
            ("LLM_MODEL_SUGGEST", &[Route::Suggestions]),
            ("LLM_MODEL_TRANSCRIBE", &[Route::Transcription]),
        ];
        for (var, routes) in overrides {
            if let Some(model) = lookup(var) {
                for route in routes {
                    routing.models.insert(*route, model.trim().to_string());
                }
            }
        }
        routing
    }

    pub fn set(&mut self, route: Route, model: impl Into<String>) {
        self.models.insert(route, model.into());
    }

    pub fn model(&self, route: Route) -> Option<&str> {
        self.models.get(&route).map(String::as_str).filter(|m| !m.is_empty())
    }

    /// Fails if any route lacks a model identifier.
    pub fn validate(&self) -> Result<(), GatewayError> {
        for route in Route::ALL {
            if self.model(route).is_none() {
                return Err(GatewayError::Config(format!("no model configured for route `{route}`")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Delays before each retry; its length is the retry limit.
    pub backoff: Vec<Duration>,
    /// Overrides every route's budget when set.
    pub timeout_override: Option<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            backoff: vec![Duration::from_millis(500), Duration::from_secs(1), Duration::from_secs(2)],
            timeout_override: None,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy { backoff: Vec::new(), timeout_override: None }
    }

    fn budget(&self, route: Route) -> Duration {
        self.timeout_override.unwrap_or_else(|| route.timeout())
    }
}

/// Environment-derived gateway settings.
#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub mode: Mode,
    pub api_base: Option<String>,
    pub api_key: Option<String>,
    pub fixture_dir: Option<PathBuf>,
    pub routing: ModelRouting,
}

impl GatewayConfig {
    pub fn from_env() -> Result<Self, GatewayError> {
        Self::from_lookup(|k| env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, GatewayError> {
        let mode = lookup("LLM_MODE").as_deref().unwrap_or("live").parse()?;
        Ok(GatewayConfig {
            mode,
            api_base: lookup("LLM_API_BASE"),
            api_key: lookup("LLM_API_KEY"),
            fixture_dir: lookup("LLM_FIXTURE_DIR").map(PathBuf::from),
            routing: ModelRouting::from_lookup(&lookup),
        })
    }
}

/// Routed, retried and time-bounded provider access. Cheap to clone.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn LlmBackend>,
    routing: Arc<ModelRouting>,
    policy: Arc<RetryPolicy>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn LlmBackend>, routing: ModelRouting, policy: RetryPolicy) -> Self {
        Gateway { backend, routing: Arc::new(routing), policy: Arc::new(policy) }
    }

    /// Replays fixtures from `store` with default routing and no retries.
    pub fn mock(store: Arc<FixtureStore>) -> Self {
        Gateway::new(Arc::new(FixtureBackend::new(store)), ModelRouting::default(), RetryPolicy::none())
    }

    /// Builds the gateway for the configured mode, failing fast on missing
    /// settings.
    pub fn from_config(config: &GatewayConfig) -> Result<Self, GatewayError> {
        let fixture_store = || -> Result<Arc<FixtureStore>, GatewayError> {
            let dir = config
                .fixture_dir
                .clone()
                .ok_or_else(|| GatewayError::Config("LLM_FIXTURE_DIR is required in mock and record modes".into()))?;
            Ok(Arc::new(FixtureStore::open(dir)?))
        };
        let live = || -> Result<OpenAiBackend, GatewayError> {
            config.routing.validate()?;
            let base = config
                .api_base
                .clone()
                .ok_or_else(|| GatewayError::Config("LLM_API_BASE is required in live and record modes".into()))?;
            OpenAiBackend::new(base, config.api_key.clone())
        };
        let (backend, policy): (Arc<dyn LlmBackend>, RetryPolicy) = match config.mode {
            Mode::Mock => (Arc::new(FixtureBackend::new(fixture_store()?)), RetryPolicy::none()),
            Mode::Live => (Arc::new(live()?), RetryPolicy::default()),
            Mode::Record => (Arc::new(RecordingBackend::new(live()?, fixture_store()?)), RetryPolicy::default()),
        };
        Ok(Gateway::new(backend, config.routing.clone(), policy))
    }

    pub fn routing(&self) -> &ModelRouting {
        &self.routing
    }

    fn model_for(&self, route: Route) -> Result<&str, GatewayError> {
        self.routing
            .model(route)
            .ok_or_else(|| GatewayError::Config(format!("no model configured for route `{route}`")))
    }

    pub async fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, GatewayError> {
        request.validate()?;
        let model = self.model_for(request.route)?;
        let budget = self.policy.budget(request.route);
        let attempts = async {
            let mut attempt = 0;
            loop {
                match self.backend.complete(model, request).await {
                    Err(e) if e.is_transient() && attempt < self.policy.backoff.len() => {
                        tracing::warn!(route = %request.route, attempt, error = %e, "retrying provider call");
                        tokio::time::sleep(self.policy.backoff[attempt]).await;
                        attempt += 1;
                    }
                    other => return other,
                }
            }
        };
        let response = tokio::time::timeout(budget, attempts)
            .await
            .map_err(|_| GatewayError::Timeout { route: request.route, budget })??;
        check_response(response)
    }

    /// Streams the completion into `sink`. Retries only happen before the
    /// first increment has been delivered.
    pub async fn complete_stream(
        &self,
        request: &ProviderRequest,
        sink: &mut TextSink<'_>,
    ) -> Result<ProviderResponse, GatewayError> {
        request.validate()?;
        if !request.stream {
            return Err(GatewayError::InvalidRequest("complete_stream needs stream = true".into()));
        }
        let model = self.model_for(request.route)?;
        let budget = self.policy.budget(request.route);
        let mut delivered = false;
        let attempts = async {
            let mut attempt = 0;
            loop {
                let mut tracking = |chunk: &str| {
                    delivered = true;
                    sink(chunk);
                };
                let result = self.backend.complete_stream(model, request, &mut tracking).await;
                match result {
                    Err(e) if e.is_transient() && !delivered && attempt < self.policy.backoff.len() => {
                        tracing::warn!(route = %request.route, attempt, error = %e, "retrying stream");
                        tokio::time::sleep(self.policy.backoff[attempt]).await;
                        attempt += 1;
                    }
                    other => return other,
                }
            }
        };
        let response = tokio::time::timeout(budget, attempts)
            .await
            .map_err(|_| GatewayError::Timeout { route: request.route, budget })??;
        check_response(response)
    }

    pub async fn transcribe(&self, audio: &[u8], media_type: &str) -> Result<String, GatewayError> {
        if audio.is_empty() {
            return Err(GatewayError::InvalidRequest("audio must not be empty".into()));
        }
        if !SUPPORTED_AUDIO.contains(&media_type) {
            return Err(GatewayError::UnsupportedMedia(media_type.to_string()));
        }
        let model = self.model_for(Route::Transcription)?;
        let budget = self.policy.budget(Route::Transcription);
        let attempts = async {
            let mut attempt = 0;
            loop {
                match self.backend.transcribe(model, audio, media_type).await {
                    Err(e) if e.is_transient() && attempt < self.policy.backoff.len() => {
                        tokio::time::sleep(self.policy.backoff[attempt]).await;
                        attempt += 1;
                    }
                    other => return other,
                }
            }
        };
        tokio::time::timeout(budget, attempts)
            .await
            .map_err(|_| GatewayError::Timeout { route: Route::Transcription, budget })?
    }
}

fn check_response(response: ProviderResponse) -> Result<ProviderResponse, GatewayError> {
    if response.finish_reason == FinishReason::Stop && response.content.is_empty() {
        return Err(GatewayError::Provider {
            status: None,
            message: "provider finished with empty content".into(),
        });
    }
    Ok(response)
}

/// Splits `text` into increments of at most `MOCK_CHUNK_CHARS` characters.
pub fn chunk_text(text: &str) -> impl Iterator<Item = &str> {
    let mut rest = text;
    std::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        let end = rest.char_indices().nth(MOCK_CHUNK_CHARS).map_or(rest.len(), |(i, _)| i);
        let (head, tail) = rest.split_at(end);
        rest = tail;
        Some(head)
    })
}
