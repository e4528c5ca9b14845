use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use async_trait::async_trait;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::types::{audio_key, CanonicalRequest, ProviderRequest, ProviderResponse};
use super::{chunk_text, GatewayError, LlmBackend, TextSink};

/// One replayable provider interaction, stored as `<key>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fixture {
    Completion {
        key: String,
        request: CanonicalRequest,
        response: ProviderResponse,
    },
    Transcription {
        key: String,
        media_type: String,
        text: String,
    },
}

impl Fixture {
    pub fn completion(request: &ProviderRequest, response: ProviderResponse) -> Self {
        Fixture::Completion { key: request.fixture_key(), request: request.canonical(), response }
    }

    pub fn transcription(audio: &[u8], media_type: &str, text: impl Into<String>) -> Self {
        Fixture::Transcription { key: audio_key(audio), media_type: media_type.to_string(), text: text.into() }
    }

    pub fn key(&self) -> &str {
        match self {
            Fixture::Completion { key, .. } | Fixture::Transcription { key, .. } => key,
        }
    }
}

/// Fixtures sorted by key, optionally backed by a directory.
#[derive(Debug, Default)]
pub struct FixtureStore {
    dir: Option<PathBuf>,
    fixtures: RwLock<BTreeMap<String, Fixture>>,
}

impl FixtureStore {
    pub fn in_memory() -> Self {
        FixtureStore::default()
    }

    /// Loads every `*.json` fixture in `dir`. A file whose name does not
    /// match its key is rejected.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        let mut fixtures = BTreeMap::new();
        if dir.exists() {
            let entries = fs::read_dir(&dir).map_err(|e| config_error("cannot list fixture directory", e))?;
            for entry in entries {
                let path = entry.map_err(|e| config_error("cannot list fixture directory", e))?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let fixture = read_fixture(&path)?;
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                if stem != fixture.key() {
                    return Err(GatewayError::Config(format!(
                        "fixture file {stem}.json holds key {}",
                        fixture.key()
                    )));
                }
                fixtures.insert(fixture.key().to_string(), fixture);
            }
        }
        Ok(FixtureStore { dir: Some(dir), fixtures: RwLock::new(fixtures) })
    }

    pub fn len(&self) -> usize {
        self.fixtures.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.read().is_empty()
    }

    pub fn get(&self, key: &str) -> Option<Fixture> {
        self.fixtures.read().get(key).cloned()
    }

    pub fn keys(&self) -> Vec<String> {
        self.fixtures.read().keys().cloned().collect()
    }

    pub fn all(&self) -> Vec<Fixture> {
        self.fixtures.read().values().cloned().collect()
    }

    /// Adds or replaces a fixture, writing it to disk when directory-backed.
    pub fn insert(&self, fixture: Fixture) -> Result<(), GatewayError> {
        if let Some(dir) = &self.dir {
            fs::create_dir_all(dir).map_err(|e| config_error("cannot create fixture directory", e))?;
            let path = dir.join(format!("{}.json", fixture.key()));
            let tmp = path.with_extension("json.tmp");
            let mut body = serde_json::to_string_pretty(&fixture).expect("fixtures serialize");
            body.push('\n');
            fs::write(&tmp, body).map_err(|e| config_error("cannot write fixture", e))?;
            fs::rename(&tmp, &path).map_err(|e| config_error("cannot write fixture", e))?;
        }
        self.fixtures.write().insert(fixture.key().to_string(), fixture);
        Ok(())
    }

    pub fn completion(&self, request: &ProviderRequest) -> Result<ProviderResponse, GatewayError> {
        let key = request.fixture_key();
        match self.get(&key) {
            Some(Fixture::Completion { response, .. }) => Ok(response),
            _ => Err(GatewayError::FixtureMiss { key }),
        }
    }

    pub fn transcription(&self, audio: &[u8]) -> Result<String, GatewayError> {
        let key = audio_key(audio);
        match self.get(&key) {
            Some(Fixture::Transcription { text, .. }) => Ok(text),
            _ => Err(GatewayError::FixtureMiss { key }),
        }
    }
}

fn read_fixture(path: &Path) -> Result<Fixture, GatewayError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("?").to_string();
    let text = fs::read_to_string(path).map_err(|e| config_error(&format!("cannot read fixture {name}"), e))?;
    serde_json::from_str(&text).map_err(|e| GatewayError::Config(format!("malformed fixture {name}: {e}")))
}

fn config_error(what: &str, err: std::io::Error) -> GatewayError {
    GatewayError::Config(format!("{what}: {}", err.kind()))
}

/// Offline provider that answers from a [`FixtureStore`].
#[derive(Debug, Clone)]
pub struct FixtureBackend {
    store: Arc<FixtureStore>,
}

impl FixtureBackend {
    pub fn new(store: Arc<FixtureStore>) -> Self {
        FixtureBackend { store }
    }

    pub fn store(&self) -> &Arc<FixtureStore> {
        &self.store
    }
}

#[async_trait]
impl LlmBackend for FixtureBackend {
    async fn complete(&self, _model: &str, request: &ProviderRequest) -> Result<ProviderResponse, GatewayError> {
        self.store.completion(request)
    }

    async fn complete_stream(
        &self,
        _model: &str,
        request: &ProviderRequest,
        sink: &mut TextSink<'_>,
    ) -> Result<ProviderResponse, GatewayError> {
        let response = self.store.completion(request)?;
        for chunk in chunk_text(&response.content) {
            sink(chunk);
        }
        Ok(response)
    }

    async fn transcribe(&self, _model: &str, audio: &[u8], _media_type: &str) -> Result<String, GatewayError> {
        self.store.transcription(audio)
    }
}

/// Forwards to a live backend and captures every successful response.
pub struct RecordingBackend<B> {
    inner: B,
    store: Arc<FixtureStore>,
}

impl<B> RecordingBackend<B> {
    pub fn new(inner: B, store: Arc<FixtureStore>) -> Self {
        RecordingBackend { inner, store }
    }
}

#[async_trait]
impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    async fn complete(&self, model: &str, request: &ProviderRequest) -> Result<ProviderResponse, GatewayError> {
        let response = self.inner.complete(model, request).await?;
        self.store.insert(Fixture::completion(request, response.clone()))?;
        Ok(response)
    }

    async fn complete_stream(
        &self,
        model: &str,
        request: &ProviderRequest,
        sink: &mut TextSink<'_>,
    ) -> Result<ProviderResponse, GatewayError> {
        let response = self.inner.complete_stream(model, request, sink).await?;
        if response.finish_reason != super::FinishReason::Error {
            self.store.insert(Fixture::completion(request, response.clone()))?;
        }
        Ok(response)
    }

    async fn transcribe(&self, model: &str, audio: &[u8], media_type: &str) -> Result<String, GatewayError> {
        let text = self.inner.transcribe(model, audio, media_type).await?;
        self.store.insert(Fixture::transcription(audio, media_type, text.clone()))?;
        Ok(text)
    }
}
