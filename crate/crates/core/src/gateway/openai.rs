use async_trait::async_trait;
use futures::StreamExt;
use serde::Deserialize;
use serde_json::json;

use super::types::{FinishReason, ProviderRequest, ProviderResponse, Usage};
use super::{GatewayError, LlmBackend, TextSink};

/// Client for an OpenAI-compatible `/chat/completions` and
/// `/audio/transcriptions` API.
#[derive(Debug, Clone)]
pub struct OpenAiBackend {
    client: reqwest::Client,
    base: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct CompletionBody {
    #[serde(default)]
    model: String,
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<UsageBody>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    message: Option<ChoiceMessage>,
    #[serde(default)]
    delta: Option<ChoiceMessage>,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct UsageBody {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

fn finish_reason(raw: Option<&str>) -> FinishReason {
    match raw {
        Some("length") => FinishReason::Length,
        Some("stop") | None => FinishReason::Stop,
        Some(_) => FinishReason::Stop,
    }
}

fn transport(err: reqwest::Error) -> GatewayError {
    GatewayError::Provider { status: err.status().map(|s| s.as_u16()), message: err.without_url().to_string() }
}

impl OpenAiBackend {
    pub fn new(base: impl Into<String>, api_key: Option<String>) -> Result<Self, GatewayError> {
        let client = reqwest::Client::builder()
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        Ok(OpenAiBackend { client, base: base.into().trim_end_matches('/').to_string(), api_key })
    }

    fn post(&self, path: &str) -> reqwest::RequestBuilder {
        let builder = self.client.post(format!("{}{path}", self.base));
        match &self.api_key {
            Some(key) => builder.bearer_auth(key),
            None => builder,
        }
    }

    fn body(model: &str, request: &ProviderRequest, stream: bool) -> serde_json::Value {
        json!({
            "model": model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "stream": stream,
        })
    }

    async fn send(&self, builder: reqwest::RequestBuilder) -> Result<reqwest::Response, GatewayError> {
        let response = builder.send().await.map_err(transport)?;
        let status = response.status();
        if status.is_success() {
            return Ok(response);
        }
        let text = response.text().await.unwrap_or_default();
        let message: String = text.chars().take(300).collect();
        Err(GatewayError::Provider { status: Some(status.as_u16()), message })
    }
}

#[async_trait]
impl LlmBackend for OpenAiBackend {
    async fn complete(&self, model: &str, request: &ProviderRequest) -> Result<ProviderResponse, GatewayError> {
        let response = self.send(self.post("/chat/completions").json(&Self::body(model, request, false))).await?;
        let body: CompletionBody = response.json().await.map_err(transport)?;
        let choice = body.choices.into_iter().next().ok_or_else(|| GatewayError::Provider {
            status: None,
            message: "response has no choices".into(),
        })?;
        let usage = body.usage.map_or(Usage::default(), |u| Usage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
        });
        Ok(ProviderResponse {
            content: choice.message.and_then(|m| m.content).unwrap_or_default(),
            finish_reason: finish_reason(choice.finish_reason.as_deref()),
            usage,
            provider_model: if body.model.is_empty() { model.to_string() } else { body.model },
        })
    }

    async fn complete_stream(
        &self,
        model: &str,
        request: &ProviderRequest,
        sink: &mut TextSink<'_>,
    ) -> Result<ProviderResponse, GatewayError> {
        let response = self.send(self.post("/chat/completions").json(&Self::body(model, request, true))).await?;
        let mut bytes = response.bytes_stream();
        let mut pending = Vec::<u8>::new();
        let mut content = String::new();
        let mut finish: Option<String> = None;
        let mut provider_model = model.to_string();
        let mut done = false;

        let partial = |content: String, model: String| ProviderResponse {
            content,
            finish_reason: FinishReason::Error,
            usage: Usage::default(),
            provider_model: model,
        };

        while !done {
            let chunk = match bytes.next().await {
                None => break,
                Some(Ok(chunk)) => chunk,
                Some(Err(e)) if content.is_empty() => return Err(transport(e)),
                Some(Err(_)) => return Ok(partial(content, provider_model)),
            };
            pending.extend_from_slice(&chunk);
            while let Some(pos) = pending.iter().position(|b| *b == b'\n') {
                let line: Vec<u8> = pending.drain(..=pos).collect();
                let line = String::from_utf8_lossy(&line);
                let Some(data) = line.trim().strip_prefix("data:") else { continue };
                let data = data.trim();
                if data == "[DONE]" {
                    done = true;
                    break;
                }
                let Ok(event) = serde_json::from_str::<CompletionBody>(data) else { continue };
                if !event.model.is_empty() {
                    provider_model = event.model;
                }
                if let Some(choice) = event.choices.into_iter().next() {
                    if let Some(delta) = choice.delta.and_then(|d| d.content).filter(|d| !d.is_empty()) {
                        sink(&delta);
                        content.push_str(&delta);
                    }
                    if choice.finish_reason.is_some() {
                        finish = choice.finish_reason;
                    }
                }
            }
        }
        if !done && finish.is_none() {
            // The connection closed without a terminal event.
            if content.is_empty() {
                return Err(GatewayError::Provider { status: None, message: "stream ended early".into() });
            }
            return Ok(partial(content, provider_model));
        }
        Ok(ProviderResponse {
            content,
            finish_reason: finish_reason(finish.as_deref()),
            usage: Usage::default(),
            provider_model,
        })
    }

    async fn transcribe(&self, model: &str, audio: &[u8], media_type: &str) -> Result<String, GatewayError> {
        let extension = media_type.rsplit('/').next().unwrap_or("bin");
        let part = reqwest::multipart::Part::bytes(audio.to_vec())
            .file_name(format!("audio.{extension}"))
            .mime_str(media_type)
            .map_err(|_| GatewayError::UnsupportedMedia(media_type.to_string()))?;
        let form = reqwest::multipart::Form::new().text("model", model.to_string()).part("file", part);
        let response = self.send(self.post("/audio/transcriptions").multipart(form)).await?;
        #[derive(Deserialize)]
        struct Transcript {
            text: String,
        }
        let body: Transcript = response.json().await.map_err(transport)?;
        Ok(body.text)
    }
}
