//! Onboarding ingestion: fetch and strip a landing page (or read a local
//! snapshot), then extract a [`BusinessContext`] through the gateway.

mod extract;
mod robots;
mod strip;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::gateway::GatewayError;
use crate::model::Clock;

pub use extract::{
    chat_input, page_input, context_from_chat, context_from_page, extraction_request, parse_extraction, reformat_request, Speaker,
    TranscriptTurn, FACTS_CAP, NAME_CAP, STATEMENT_CAP,
};
pub use robots::Robots;
pub use strip::{extract_title, strip_markup};

/// Maximum characters of page text kept for extraction.
pub const PAGE_TEXT_CAP: usize = 24_000;
/// Concurrent live fetches allowed per host.
pub const PER_HOST_LIMIT: usize = 2;
pub const DEFAULT_USER_AGENT: &str = "BizChatBot/0.1 (+business plan onboarding)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedPage {
    pub url: String,
    pub title: String,
    pub text: String,
    pub fetched_at: DateTime<Utc>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("url must be absolute http(s): {0}")]
    InvalidUrl(String),
    #[error("fetch failed with status {0}")]
    FetchFailed(u16),
    #[error("page is not HTML")]
    NotHtml,
    #[error("robots.txt disallows fetching this page")]
    RobotsDisallowed,
    #[error("{0}")]
    EmptyInput(String),
    #[error("extraction reply did not follow the structured layout")]
    ExtractionUnparseable,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Builds an `ExtractedPage` from raw HTML, applying the text cap.
pub fn page_from_html(url: &str, html: &str, fetched_at: DateTime<Utc>) -> ExtractedPage {
    let text = strip_markup(html);
    let truncated = text.chars().count() > PAGE_TEXT_CAP;
    let text = if truncated { text.chars().take(PAGE_TEXT_CAP).collect() } else { text };
    ExtractedPage { url: url.to_string(), title: extract_title(html), text, fetched_at, truncated }
}

/// Accepts only absolute http(s) URLs with a host.
pub fn check_url(raw: &str) -> Result<url::Url, IngestError> {
    let url = url::Url::parse(raw).map_err(|_| IngestError::InvalidUrl(raw.to_string()))?;
    if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none() {
        return Err(IngestError::InvalidUrl(raw.to_string()));
    }
    Ok(url)
}

/// Where pages come from.
pub enum PageSource {
    /// Live HTTP, honoring robots.txt and a per-host concurrency limit.
    Live(LiveFetcher),
    /// Local snapshots listed in `<dir>/sites.json` (url → html file).
    Fixture(FixtureSites),
}

impl PageSource {
    /// `INGEST_MODE` ∈ {live, fixture}; fixture mode reads `fixture_dir`.
    pub fn from_lookup(
        lookup: impl Fn(&str) -> Option<String>,
        fixture_dir: impl Into<PathBuf>,
    ) -> Result<PageSource, IngestError> {
        match lookup("INGEST_MODE").as_deref().unwrap_or("live") {
            "fixture" => Ok(PageSource::Fixture(FixtureSites::open(fixture_dir)?)),
            _ => Ok(PageSource::Live(LiveFetcher::new(
                lookup("INGEST_USER_AGENT").unwrap_or_else(|| DEFAULT_USER_AGENT.to_string()),
            ))),
        }
    }

    pub async fn fetch_and_strip(&self, url: &str, clock: &dyn Clock) -> Result<ExtractedPage, IngestError> {
        let parsed = check_url(url)?;
        let html = match self {
            PageSource::Live(fetcher) => fetcher.fetch(&parsed).await?,
            PageSource::Fixture(sites) => sites.fetch(url)?,
        };
        Ok(page_from_html(url, &html, clock.now()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct FixtureSites {
    dir: PathBuf,
    sites: BTreeMap<String, String>,
}

impl FixtureSites {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, IngestError> {
        let dir = dir.into();
        let manifest = dir.join("sites.json");
        let sites = match std::fs::read_to_string(&manifest) {
            Ok(text) => serde_json::from_str(&text).map_err(|_| IngestError::FetchFailed(500))?,
            Err(_) => BTreeMap::new(),
        };
        Ok(FixtureSites { dir, sites })
    }

    pub fn fetch(&self, url: &str) -> Result<String, IngestError> {
        let file = self.sites.get(url).ok_or(IngestError::FetchFailed(404))?;
        if !(file.ends_with(".html") || file.ends_with(".htm")) {
            return Err(IngestError::NotHtml);
        }
        std::fs::read_to_string(self.dir.join(file)).map_err(|_| IngestError::FetchFailed(404))
    }
}

pub struct LiveFetcher {
    client: reqwest::Client,
    user_agent: String,
    hosts: parking_lot::Mutex<HashMap<String, Arc<Semaphore>>>,
}

impl LiveFetcher {
    pub fn new(user_agent: impl Into<String>) -> Self {
        LiveFetcher {
            client: reqwest::Client::new(),
            user_agent: user_agent.into(),
            hosts: parking_lot::Mutex::new(HashMap::new()),
        }
    }

    fn host_slot(&self, url: &url::Url) -> Arc<Semaphore> {
        let key = format!("{}:{}", url.host_str().unwrap_or(""), url.port_or_known_default().unwrap_or(0));
        self.hosts.lock().entry(key).or_insert_with(|| Arc::new(Semaphore::new(PER_HOST_LIMIT))).clone()
    }

    async fn get(&self, url: &url::Url) -> Result<reqwest::Response, IngestError> {
        self.client
            .get(url.as_str())
            .header(reqwest::header::USER_AGENT, &self.user_agent)
            .send()
            .await
            .map_err(|e| IngestError::FetchFailed(e.status().map_or(502, |s| s.as_u16())))
    }

    async fn fetch(&self, url: &url::Url) -> Result<String, IngestError> {
        let slot = self.host_slot(url);
        let _permit = slot.acquire().await.expect("semaphores are never closed");

        let robots_url = url.join("/robots.txt").map_err(|_| IngestError::InvalidUrl(url.to_string()))?;
        let robots = match self.get(&robots_url).await {
            Ok(resp) if resp.status().is_success() => Robots::parse(&resp.text().await.unwrap_or_default()),
            _ => Robots::default(),
        };
        let path = match url.query() {
            Some(q) => format!("{}?{q}", url.path()),
            None => url.path().to_string(),
        };
        if !robots.allows(&self.user_agent, &path) {
            return Err(IngestError::RobotsDisallowed);
        }

        let response = self.get(url).await?;
        let status = response.status();
        if !status.is_success() {
            return Err(IngestError::FetchFailed(status.as_u16()));
        }
        let content_type = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_ascii_lowercase();
        if !(content_type.starts_with("text/html") || content_type.starts_with("application/xhtml+xml")) {
            return Err(IngestError::NotHtml);
        }
        response.text().await.map_err(|_| IngestError::FetchFailed(502))
    }
}
