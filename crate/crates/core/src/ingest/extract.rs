//! Structured extraction of a `BusinessContext` from page text or an
//! onboarding chat, via labeled lines returned by the website_summary route.

use crate::gateway::{Gateway, Message, ProviderRequest, Route};
use crate::model::{BusinessContext, ContextSource, Fact, FactCategory, SUMMARY_CAP};

use super::{ExtractedPage, IngestError};

pub const NAME_CAP: usize = 120;
pub const STATEMENT_CAP: usize = 400;
pub const FACTS_CAP: usize = 40;

const EXTRACTION_SYSTEM_PROMPT: &str = "\
You extract facts about a small business so an assistant can draft its business plan.
Reply with labeled lines only, in this layout:
NAME: <the business name>
SUMMARY: <two or three plain sentences describing the business>
FACT/<category>: <one short fact>
Repeat FACT lines as needed. <category> is one of: offering, customers, location, stage, team, pricing, other.
Use only information present in the input. Do not add headings, lists or commentary.";

const REFORMAT_INSTRUCTION: &str = "\
Your previous answer did not follow the required layout. Rewrite it using only the labeled lines \
NAME:, SUMMARY: and FACT/<category>:, one per line, with nothing else.";

const EXTRACTION_MAX_TOKENS: u32 = 700;

/// Speaker in an onboarding transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TranscriptTurn {
    pub role: Speaker,
    pub text: String,
}

/// Builds a context from a fetched page.
pub async fn context_from_page(gateway: &Gateway, page: &ExtractedPage) -> Result<BusinessContext, IngestError> {
    if page.text.trim().is_empty() {
        return Err(IngestError::EmptyInput("page has no text".into()));
    }
    extract(gateway, page_input(page), ContextSource::Website { url: page.url.clone() }).await
}

/// Extraction input for a page.
pub fn page_input(page: &ExtractedPage) -> String {
    format!("Website: {}\nTitle: {}\n\n{}", page.url, page.title, page.text)
}

/// Extraction input for an onboarding transcript.
pub fn chat_input(transcript: &[TranscriptTurn]) -> String {
    let mut input = String::from("Onboarding conversation:\n");
    for turn in transcript {
        let who = match turn.role {
            Speaker::User => "Owner",
            Speaker::Assistant => "Assistant",
        };
        input.push_str(&format!("{who}: {}\n", turn.text.trim()));
    }
    input
}

/// Builds a context from an onboarding conversation.
pub async fn context_from_chat(
    gateway: &Gateway,
    conversation_id: &str,
    transcript: &[TranscriptTurn],
) -> Result<BusinessContext, IngestError> {
    if !transcript.iter().any(|t| t.role == Speaker::User && !t.text.trim().is_empty()) {
        return Err(IngestError::EmptyInput("transcript has no user message".into()));
    }
    extract(gateway, chat_input(transcript), ContextSource::Chat { conversation_id: conversation_id.to_string() }).await
}

/// The exact request `context_from_page`/`context_from_chat` send first.
pub fn extraction_request(input: &str) -> ProviderRequest {
    ProviderRequest::new(
        Route::WebsiteSummary,
        vec![Message::system(EXTRACTION_SYSTEM_PROMPT), Message::user(input)],
        EXTRACTION_MAX_TOKENS,
    )
}

/// The follow-up sent when the first reply did not parse.
pub fn reformat_request(first: &ProviderRequest, reply: &str) -> ProviderRequest {
    let mut request = first.clone();
    request.messages.push(Message::assistant(reply));
    request.messages.push(Message::user(REFORMAT_INSTRUCTION));
    request
}

async fn extract(gateway: &Gateway, input: String, source: ContextSource) -> Result<BusinessContext, IngestError> {
    let request = extraction_request(&input);
    let reply = gateway.complete(&request).await?.content;
    if let Some(context) = parse_extraction(&reply, source.clone()) {
        return Ok(context);
    }
    tracing::debug!("extraction reply unparseable, asking for a reformat");
    let retry = reformat_request(&request, &reply);
    let reply = gateway.complete(&retry).await?.content;
    parse_extraction(&reply, source).ok_or(IngestError::ExtractionUnparseable)
}

fn truncate_chars(s: &str, cap: usize) -> String {
    s.chars().take(cap).collect::<String>().trim_end().to_string()
}

/// Parses the labeled-line layout. Returns `None` unless a name and at
/// least one of summary or facts are present. All fields are clamped to
/// their caps.
pub fn parse_extraction(reply: &str, source: ContextSource) -> Option<BusinessContext> {
    let mut name: Option<String> = None;
    let mut summary = String::new();
    let mut facts = Vec::new();
    let mut in_summary = false;

    for raw in reply.lines() {
        let line = raw.trim().trim_start_matches(['-', '*', '•']).trim();
        if line.is_empty() {
            in_summary = false;
            continue;
        }
        let Some((label, value)) = line.split_once(':') else {
            if in_summary {
                summary.push(' ');
                summary.push_str(line);
            }
            continue;
        };
        let label = label.trim().trim_matches('*').trim().to_ascii_uppercase();
        let value = super::strip::collapse_whitespace(value.trim().trim_matches('*'));
        let continuing = std::mem::take(&mut in_summary);
        if label == "NAME" {
            if name.is_none() && !value.is_empty() {
                name = Some(value);
            }
        } else if label == "SUMMARY" {
            summary = value;
            in_summary = true;
        } else if let Some(category) = label.strip_prefix("FACT") {
            let category = category.trim_start_matches(['/', ' ']).trim();
            if !value.is_empty() && facts.len() < FACTS_CAP {
                facts.push(Fact {
                    category: FactCategory::from_label(category),
                    statement: truncate_chars(&value, STATEMENT_CAP),
                });
            }
        } else if continuing {
            summary.push(' ');
            summary.push_str(line);
            in_summary = true;
        }
    }

    let name = truncate_chars(&name?, NAME_CAP);
    let summary = truncate_chars(&super::strip::collapse_whitespace(&summary), SUMMARY_CAP);
    if name.is_empty() || (summary.is_empty() && facts.is_empty()) {
        return None;
    }
    Some(BusinessContext { business_name: name, summary, facts, source })
}
