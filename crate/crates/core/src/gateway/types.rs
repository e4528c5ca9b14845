use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::to_canonical_json;

/// Traffic class of a provider call; each route maps to one configured model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Chat,
    Suggestions,
    WebsiteSummary,
    SectionGeneration,
    PitchPrep,
    Transcription,
}

impl Route {
    pub const ALL: [Route; 6] = [
        Route::Chat,
        Route::Suggestions,
        Route::WebsiteSummary,
        Route::SectionGeneration,
        Route::PitchPrep,
        Route::Transcription,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Route::Chat => "chat",
            Route::Suggestions => "suggestions",
            Route::WebsiteSummary => "website_summary",
            Route::SectionGeneration => "section_generation",
            Route::PitchPrep => "pitch_prep",
            Route::Transcription => "transcription",
        }
    }

    pub fn default_temperature(self) -> f64 {
        match self {
            Route::Chat | Route::Suggestions | Route::PitchPrep => 0.7,
            Route::SectionGeneration => 0.3,
            Route::WebsiteSummary | Route::Transcription => 0.0,
        }
    }

    /// Wall-clock budget for one call including retries.
    pub fn timeout(self) -> Duration {
        Duration::from_secs(match self {
            Route::Chat | Route::Suggestions => 30,
            Route::WebsiteSummary | Route::PitchPrep | Route::Transcription => 60,
            Route::SectionGeneration => 120,
        })
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: Role::Assistant, content: content.into() }
    }
}

/// Provider-agnostic chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub route: Route,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub stream: bool,
}

/// The replay identity of a request. `stream` is transport, not content,
/// and temperature is compared at two decimals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalRequest {
    pub route: Route,
    pub messages: Vec<Message>,
    pub temperature_centi: i64,
    pub max_tokens: u32,
}

impl ProviderRequest {
    /// A request with the route's default temperature and no streaming.
    pub fn new(route: Route, messages: Vec<Message>, max_tokens: u32) -> Self {
        ProviderRequest { route, messages, temperature: route.default_temperature(), max_tokens, stream: false }
    }

    pub fn streaming(mut self) -> Self {
        self.stream = true;
        self
    }

    pub fn validate(&self) -> Result<(), super::GatewayError> {
        use super::GatewayError::InvalidRequest;
        if self.route == Route::Transcription {
            return Err(InvalidRequest("transcription requests go through transcribe()".into()));
        }
        match self.messages.first() {
            None => return Err(InvalidRequest("messages must not be empty".into())),
            Some(first) if first.role != Role::System => {
                return Err(InvalidRequest("first message must be the system prompt".into()))
            }
            _ => {}
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn canonical(&self) -> CanonicalRequest {
        CanonicalRequest {
            route: self.route,
            messages: self.messages.clone(),
            temperature_centi: (self.temperature * 100.0).round() as i64,
            max_tokens: self.max_tokens,
        }
    }

    /// Hex SHA-256 of the canonical serialization; the fixture key.
    pub fn fixture_key(&self) -> String {
        sha256_hex(to_canonical_json(&self.canonical()).as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fixture key of an audio clip.
pub fn audio_key(audio: &[u8]) -> String {
    sha256_hex(audio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub content: String,
    pub finish_reason: FinishReason,
    #[serde(default)]
    pub usage: Usage,
    pub provider_model: String,
}

impl ProviderResponse {
    pub fn stop(content: impl Into<String>, model: impl Into<String>) -> Self {
        ProviderResponse {
            content: content.into(),
            finish_reason: FinishReason::Stop,
            usage: Usage::default(),
            provider_model: model.into(),
        }
    }
}

pub const SUPPORTED_AUDIO: [&str; 3] = ["audio/webm", "audio/wav", "audio/mpeg"];
