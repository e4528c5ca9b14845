//! Proptest strategies and small builders shared by the test suites.

use std::collections::BTreeMap;

use chrono::{DateTime, TimeZone, Utc};
use proptest::prelude::*;

use crate::model::{
    Author, Block, BusinessContext, ContextSource, DocumentMeta, Fact, FactCategory, Goal, Inline, Marks,
    PlanDocument, RichText, SectionId,
};

/// Fixed instant used by deterministic fixtures and goldens.
pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap()
}

fn text_char() -> impl Strategy<Value = char> {
    prop_oneof![
        8 => proptest::char::range('a', 'z'),
        2 => proptest::char::range('A', 'Z'),
        1 => proptest::char::range('0', '9'),
        3 => Just(' '),
        1 => prop::sample::select(vec![
            '*', '\\', '#', '-', '_', '<', '>', '&', '`', '\n', '\t', 'é', '€', '.', '?', ':'
        ]),
    ]
}

pub fn arb_text() -> impl Strategy<Value = String> {
    prop::collection::vec(text_char(), 0..24).prop_map(|cs| cs.into_iter().collect())
}

pub fn arb_marks() -> impl Strategy<Value = Marks> {
    (any::<bool>(), any::<bool>()).prop_map(|(bold, italic)| Marks { bold, italic })
}

pub fn arb_inlines() -> impl Strategy<Value = Vec<Inline>> {
    prop::collection::vec((arb_text(), arb_marks()).prop_map(|(t, m)| Inline::styled(t, m)), 0..5)
}

pub fn arb_block() -> impl Strategy<Value = Block> {
    prop_oneof![
        1 => (1u8..=3, arb_inlines()).prop_map(|(level, inlines)| Block::Heading { level, inlines }),
        3 => arb_inlines().prop_map(|inlines| Block::Paragraph { inlines }),
        1 => prop::collection::vec(arb_inlines(), 0..4).prop_map(|items| Block::BulletList { items }),
    ]
}

/// Raw, possibly non-normal block lists.
pub fn arb_blocks() -> impl Strategy<Value = Vec<Block>> {
    prop::collection::vec(arb_block(), 0..7)
}

pub fn arb_richtext() -> impl Strategy<Value = RichText> {
    arb_blocks().prop_map(|blocks| RichText::new(blocks).expect("levels are generated in range"))
}

pub fn sample_context() -> BusinessContext {
    BusinessContext {
        business_name: "Steel City Roasters".into(),
        summary: "A small-batch coffee roaster in Pittsburgh.".into(),
        facts: vec![Fact { category: FactCategory::Offering, statement: "Single-origin roasted coffee".into() }],
        source: ContextSource::Manual,
    }
}

pub fn sample_goals() -> Vec<Goal> {
    vec![
        Goal::new("goal-grant", "Apply for city grant", "Qualify for the local small-business grant"),
        Goal::new("goal-wholesale", "Grow wholesale", "Sign three cafe accounts"),
    ]
}

pub fn empty_sections() -> BTreeMap<SectionId, RichText> {
    SectionId::ALL.into_iter().map(|id| (id, RichText::empty())).collect()
}

/// A document whose sections all carry one short paragraph.
pub fn sample_document() -> PlanDocument {
    let sections = SectionId::ALL
        .into_iter()
        .map(|id| (id, RichText::new(vec![Block::paragraph(format!("Draft text for {}.", id.display_name()))]).unwrap()))
        .collect();
    PlanDocument::new_document(
        DocumentMeta { document_id: "doc-sample".into(), owner: "acct-sample".into(), created_at: epoch() },
        sample_context(),
        sample_goals(),
        sections,
        Author::Assistant,
    )
    .expect("sample document is valid")
}

/// Workspace root, for locating shipped data from tests.
pub fn repo_root() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().expect("workspace root exists")
}

pub fn corpus_dir() -> std::path::PathBuf {
    repo_root().join("corpus")
}

pub fn fixture_dir() -> std::path::PathBuf {
    repo_root().join("fixture")
}

pub fn golden_dir() -> std::path::PathBuf {
    repo_root().join("golden")
}

pub fn shipped_corpus() -> crate::corpus::Corpus {
    crate::corpus::Corpus::load(corpus_dir()).expect("shipped corpus loads")
}

type Script = dyn Fn(&crate::gateway::ProviderRequest) -> Result<crate::gateway::ProviderResponse, crate::gateway::GatewayError>
    + Send
    + Sync;

/// Backend answering every request from a closure. Streams in mock-sized chunks.
pub struct ScriptedBackend {
    script: Box<Script>,
}

impl ScriptedBackend {
    pub fn new(
        script: impl Fn(&crate::gateway::ProviderRequest) -> Result<crate::gateway::ProviderResponse, crate::gateway::GatewayError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        ScriptedBackend { script: Box::new(script) }
    }

    /// Gateway over this backend with retries disabled.
    pub fn gateway(self) -> crate::gateway::Gateway {
        crate::gateway::Gateway::new(
            std::sync::Arc::new(self),
            crate::gateway::ModelRouting::default(),
            crate::gateway::RetryPolicy::none(),
        )
    }
}

#[async_trait::async_trait]
impl crate::gateway::LlmBackend for ScriptedBackend {
    async fn complete(
        &self,
        _model: &str,
        request: &crate::gateway::ProviderRequest,
    ) -> Result<crate::gateway::ProviderResponse, crate::gateway::GatewayError> {
        (self.script)(request)
    }

    async fn complete_stream(
        &self,
        _model: &str,
        request: &crate::gateway::ProviderRequest,
        sink: &mut crate::gateway::TextSink<'_>,
    ) -> Result<crate::gateway::ProviderResponse, crate::gateway::GatewayError> {
        let response = (self.script)(request)?;
        for chunk in crate::gateway::chunk_text(&response.content) {
            sink(chunk);
        }
        Ok(response)
    }

    async fn transcribe(
        &self,
        _model: &str,
        _audio: &[u8],
        _media_type: &str,
    ) -> Result<String, crate::gateway::GatewayError> {
        Err(crate::gateway::GatewayError::InvalidRequest("scripted backend has no transcription".into()))
    }
}

/// Wraps a backend and holds each completion back for a per-request delay,
/// which lets tests choose the order in which concurrent calls finish.
pub struct DelayedBackend<B> {
    inner: B,
    delay: Box<dyn Fn(&crate::gateway::ProviderRequest) -> std::time::Duration + Send + Sync>,
}

impl<B> DelayedBackend<B> {
    pub fn new(
        inner: B,
        delay: impl Fn(&crate::gateway::ProviderRequest) -> std::time::Duration + Send + Sync + 'static,
    ) -> Self {
        DelayedBackend { inner, delay: Box::new(delay) }
    }
}

#[async_trait::async_trait]
impl<B: crate::gateway::LlmBackend> crate::gateway::LlmBackend for DelayedBackend<B> {
    async fn complete(
        &self,
        model: &str,
        request: &crate::gateway::ProviderRequest,
    ) -> Result<crate::gateway::ProviderResponse, crate::gateway::GatewayError> {
        tokio::time::sleep((self.delay)(request)).await;
        self.inner.complete(model, request).await
    }

    async fn complete_stream(
        &self,
        model: &str,
        request: &crate::gateway::ProviderRequest,
        sink: &mut crate::gateway::TextSink<'_>,
    ) -> Result<crate::gateway::ProviderResponse, crate::gateway::GatewayError> {
        tokio::time::sleep((self.delay)(request)).await;
        self.inner.complete_stream(model, request, sink).await
    }

    async fn transcribe(
        &self,
        model: &str,
        audio: &[u8],
        media_type: &str,
    ) -> Result<String, crate::gateway::GatewayError> {
        self.inner.transcribe(model, audio, media_type).await
    }
}

/// Reference for the explore-target rule: filter, then take the smallest
/// `(completeness, canonical position)` pair.
pub fn oracle_explore_target(completeness: &[f64], current: SectionId, recent: &[SectionId]) -> SectionId {
    let ranked = |keep: &dyn Fn(SectionId) -> bool| {
        let mut pool: Vec<(f64, usize)> = (0..9)
            .filter(|&i| keep(SectionId::ALL[i]))
            .map(|i| (completeness[i], i))
            .collect();
        pool.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        pool.first().map(|&(_, i)| SectionId::ALL[i])
    };
    ranked(&|s| s != current && !recent.contains(&s)).or_else(|| ranked(&|s| s != current)).unwrap()
}

/// The coffee-roaster onboarding scenario shipped under `fixture/`.
pub mod coffee {
    use std::sync::Arc;

    use crate::corpus::Corpus;
    use crate::gateway::{FixtureStore, Gateway};
    use crate::generator::generate_draft;
    use crate::ingest::{context_from_page, FixtureSites, PageSource};
    use crate::model::{DocumentMeta, FixedClock, Goal, PlanDocument};

    pub const URL: &str = "https://threeriversroasting.example/";
    pub const ACCOUNT_ID: &str = "acct-000001";
    pub const DOCUMENT_ID: &str = "doc-000001";
    pub const FIX_MESSAGE: &str = "fix the founding year in my executive summary";
    pub const MARKET_MESSAGE: &str = "How can I make my market analysis stronger for the grant?";
    pub const VOICE_FILE: &str = "jose_edit.webm";
    pub const VOICE_TEXT: &str = "change the founding year to twenty twenty-two";
    pub const INLINE_CRITERIA: &str = "two sentences on local competitors";

    pub fn goals() -> Vec<Goal> {
        vec![
            Goal::new(
                "goal-grant",
                "Apply for city grant",
                "Win a Pittsburgh small-business grant to help pay for a 25 kg roaster",
            ),
            Goal::new("goal-wholesale", "Grow wholesale", "Add six more cafe accounts within a year"),
        ]
    }

    pub fn meta() -> DocumentMeta {
        DocumentMeta { document_id: DOCUMENT_ID.into(), owner: ACCOUNT_ID.into(), created_at: super::epoch() }
    }

    /// Replay gateway over the shipped `fixture/llm` store.
    pub fn store() -> Arc<FixtureStore> {
        Arc::new(FixtureStore::open(super::fixture_dir().join("llm")).expect("shipped fixture store"))
    }

    pub fn sites() -> PageSource {
        PageSource::Fixture(FixtureSites::open(super::fixture_dir()).expect("shipped sites"))
    }

    /// Website onboarding end to end: fetch, extract, draft.
    pub async fn onboard(gateway: &Gateway, corpus: &Corpus) -> PlanDocument {
        let page = sites().fetch_and_strip(URL, &FixedClock(super::epoch())).await.expect("coffee page");
        let context = context_from_page(gateway, &page).await.expect("coffee context");
        generate_draft(gateway, corpus, &context, &goals(), meta(), &|_| {}).await.expect("coffee draft")
    }
}

/// The replayable request a stored fixture was recorded for.
pub fn request_from_canonical(canonical: &crate::gateway::CanonicalRequest) -> crate::gateway::ProviderRequest {
    crate::gateway::ProviderRequest {
        route: canonical.route,
        messages: canonical.messages.clone(),
        temperature: canonical.temperature_centi as f64 / 100.0,
        max_tokens: canonical.max_tokens,
        stream: false,
    }
}
