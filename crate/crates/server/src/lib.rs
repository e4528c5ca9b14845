//! HTTP service for onboarding, chat-driven plan editing and export.

pub mod api;
pub mod config;
pub mod error;
pub mod state;
pub mod store;

use std::sync::Arc;

use anyhow::Context;
use bizchat_core::corpus::Corpus;
use bizchat_core::gateway::Gateway;
use bizchat_core::ingest::PageSource;
use bizchat_core::model::SystemClock;

pub use api::router;
pub use config::{Cli, Settings};
pub use error::ApiError;
pub use state::{AppState, Services};

/// Builds the service state from resolved settings.
pub fn open_state(settings: &Settings) -> anyhow::Result<Arc<AppState>> {
    let gateway = Gateway::from_config(&settings.gateway).context("model gateway")?;
    let pages = PageSource::from_lookup(|k| settings.get(k), &settings.fixture_dir).context("page source")?;
    let corpus = Corpus::load(&settings.corpus_dir)
        .with_context(|| format!("loading corpus from {}", settings.corpus_dir.display()))?;
    if settings.auth_token.is_none() {
        tracing::warn!("AUTH_TOKEN is not set; no account tokens can be issued");
    }
    let services = Services {
        gateway,
        pages,
        corpus,
        clock: Arc::new(SystemClock),
        bootstrap_token: settings.auth_token.clone(),
        token_source: Box::new(state::random_token),
    };
    let state = AppState::open(&settings.data_dir, services)
        .with_context(|| format!("opening data directory {}", settings.data_dir.display()))?;
    let corrupt = state.corrupt_documents();
    if !corrupt.is_empty() {
        tracing::error!(documents = ?corrupt, "some documents could not be recovered and will not be served");
    }
    tracing::info!(documents = state.document_count(), "recovered data directory");
    Ok(Arc::new(state))
}
