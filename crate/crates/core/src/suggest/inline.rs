//! In-line generation: candidates for insertion at a cursor, shown next to
//! the section's exemplars.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Exemplar};
use crate::gateway::{Gateway, Message, ProviderRequest, Route};
use crate::generator::{context_block, goals_block};
use crate::markup::{parse_markup, render_markup};
use crate::model::{PlanDocument, RichText, SectionId};

use super::SuggestError;

pub const MAX_CANDIDATES: usize = 3;
const INLINE_MAX_TOKENS: u32 = 900;
const CANDIDATE_MARKER: &str = "=== CANDIDATE ===";

const INLINE_SYSTEM_PROMPT: &str = "\
You write short passages a small-business owner can insert into their business plan at the cursor.
Follow the owner's criteria exactly and fit the text around the cursor. Offer up to three alternatives.
Start each alternative with a line containing only `=== CANDIDATE ===`.
Use plain paragraphs, `- ` bullets, **bold** and *italic* only.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InlineRequest {
    pub section_id: SectionId,
    pub criteria: String,
    pub cursor_block: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InlineResult {
    pub candidates: Vec<RichText>,
    pub exemplars: Vec<Exemplar>,
}

fn validate(request: &InlineRequest, plan: &PlanDocument) -> Result<(), SuggestError> {
    if request.criteria.trim().is_empty() {
        return Err(SuggestError::InvalidRequest("criteria must not be empty".into()));
    }
    let blocks = plan.section(request.section_id).content.blocks().len();
    if request.cursor_block > blocks {
        return Err(SuggestError::InvalidRequest(format!(
            "cursor_block {} is past the end of the section ({blocks} blocks)",
            request.cursor_block
        )));
    }
    Ok(())
}

/// The request `inline_generate` sends.
pub fn inline_request(request: &InlineRequest, plan: &PlanDocument) -> ProviderRequest {
    let content = &plan.section(request.section_id).content;
    let blocks = content.blocks();
    let around = |range: &[crate::model::Block]| {
        let text = render_markup(&RichText::new(range.to_vec()).unwrap_or_else(|_| RichText::empty()));
        if text.is_empty() { "(nothing)".to_string() } else { text }
    };
    let cursor = request.cursor_block.min(blocks.len());
    let mut user = goals_block(plan.goals());
    user.push('\n');
    user.push_str(&context_block(plan.context()));
    user.push_str(&format!(
        "\nSection: {}\nText before the cursor:\n{}\n\nText after the cursor:\n{}\n\nCriteria: {}",
        request.section_id.display_name(),
        around(&blocks[..cursor]),
        around(&blocks[cursor..]),
        request.criteria.trim()
    ));
    ProviderRequest::new(
        Route::Suggestions,
        vec![Message::system(INLINE_SYSTEM_PROMPT), Message::user(user)],
        INLINE_MAX_TOKENS,
    )
}

fn parse_candidates(reply: &str) -> Vec<RichText> {
    let chunks: Vec<&str> = if reply.contains(CANDIDATE_MARKER) {
        reply.split(CANDIDATE_MARKER).skip(1).collect()
    } else {
        vec![reply]
    };
    chunks.into_iter().map(parse_markup).filter(|c| !c.is_empty()).take(MAX_CANDIDATES).collect()
}

/// 1..=3 candidates plus every corpus exemplar for the section.
pub async fn inline_generate(
    gateway: &Gateway,
    corpus: &Corpus,
    request: &InlineRequest,
    plan: &PlanDocument,
) -> Result<InlineResult, SuggestError> {
    validate(request, plan)?;
    let response = gateway.complete(&inline_request(request, plan)).await?;
    let candidates = parse_candidates(&response.content);
    if candidates.is_empty() {
        return Err(SuggestError::NoCandidates);
    }
    Ok(InlineResult { candidates, exemplars: corpus.exemplars(request.section_id).to_vec() })
}
