use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use bizchat_core::gateway::GatewayError;
use bizchat_core::ingest::IngestError;
use bizchat_core::model::{to_canonical_json, ModelError};
use bizchat_core::pitch::PitchError;
use bizchat_core::suggest::SuggestError;
use serde_json::{json, Value};

use crate::state::CommitError;
use crate::store::StoreError;

#[derive(Debug, Clone, PartialEq)]
pub enum ApiError {
    Unauthorized,
    Forbidden,
    NotFound(String),
    Stale { head: u64 },
    Invalid { code: &'static str, message: String },
    Provider { cause: &'static str, message: String },
    StorageCorrupt,
    Storage(String),
}

impl ApiError {
    pub fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::Invalid { code, message: message.into() }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::Forbidden => StatusCode::FORBIDDEN,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Stale { .. } => StatusCode::CONFLICT,
            ApiError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Provider { .. } => StatusCode::BAD_GATEWAY,
            ApiError::StorageCorrupt | ApiError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Body of the HTTP error, also used for SSE `error` events.
    pub fn body(&self) -> Value {
        match self {
            ApiError::Unauthorized => json!({"error": "unauthorized", "message": "missing or unknown bearer token"}),
            ApiError::Forbidden => json!({"error": "forbidden", "message": "the document belongs to another account"}),
            ApiError::NotFound(what) => json!({"error": "not_found", "message": what}),
            ApiError::Stale { head } => {
                json!({"error": "stale_proposal", "head": head, "message": "the document changed since the proposal was made"})
            }
            ApiError::Invalid { code, message } => json!({"error": code, "message": message}),
            ApiError::Provider { cause, message } => {
                json!({"error": "provider_failure", "cause": cause, "message": message})
            }
            ApiError::StorageCorrupt => json!({"error": "storage_corrupt", "message": "the document's stored history is unreadable"}),
            ApiError::Storage(message) => json!({"error": "storage", "message": message}),
        }
    }

    /// `{code, message}` payload of an SSE `error` event.
    pub fn event_payload(&self) -> Value {
        let mut body = self.body();
        let map = body.as_object_mut().expect("error bodies are objects");
        let code = map.remove("error").unwrap_or(Value::Null);
        map.insert("code".into(), code);
        body
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), [(header::CONTENT_TYPE, "application/json")], to_canonical_json(&self.body())).into_response()
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::UnsupportedMedia(m) => ApiError::invalid("unsupported_media", format!("unsupported audio type `{m}`")),
            GatewayError::InvalidRequest(m) => ApiError::invalid("invalid_request", m),
            other => ApiError::Provider { cause: other.code(), message: other.to_string() },
        }
    }
}

impl From<SuggestError> for ApiError {
    fn from(e: SuggestError) -> Self {
        match e {
            SuggestError::StaleProposal { head, .. } => ApiError::Stale { head },
            SuggestError::NoChange => ApiError::invalid("no_change", e.to_string()),
            SuggestError::InvalidRequest(m) => ApiError::invalid("invalid_request", m),
            SuggestError::NoCandidates => ApiError::Provider { cause: "unusable_reply", message: e.to_string() },
            SuggestError::Gateway(g) => g.into(),
            SuggestError::Model(m) => m.into(),
        }
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NoChange => ApiError::invalid("no_change", e.to_string()),
            other => ApiError::invalid("invalid_request", other.to_string()),
        }
    }
}

impl From<PitchError> for ApiError {
    fn from(e: PitchError) -> Self {
        match e {
            PitchError::UnknownGoal(g) => ApiError::invalid("unknown_goal", format!("the document has no goal `{g}`")),
            PitchError::QuestionParseFailed => ApiError::Provider { cause: "unusable_reply", message: e.to_string() },
            PitchError::Gateway(g) => g.into(),
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::InvalidUrl(_) => ApiError::invalid("invalid_url", e.to_string()),
            IngestError::EmptyInput(m) => ApiError::invalid("empty_input", m),
            IngestError::FetchFailed(_) => ApiError::invalid("fetch_failed", e.to_string()),
            IngestError::NotHtml => ApiError::invalid("not_html", e.to_string()),
            IngestError::RobotsDisallowed => ApiError::invalid("robots_disallowed", e.to_string()),
            IngestError::ExtractionUnparseable => ApiError::Provider { cause: "unusable_reply", message: e.to_string() },
            IngestError::Gateway(g) => g.into(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        tracing::error!(error = %e, "storage failure");
        ApiError::Storage("the change could not be saved".into())
    }
}

impl<E: Into<ApiError>> From<CommitError<E>> for ApiError {
    fn from(e: CommitError<E>) -> Self {
        match e {
            CommitError::Rejected(inner) => inner.into(),
            CommitError::Store(s) => s.into(),
        }
    }
}
