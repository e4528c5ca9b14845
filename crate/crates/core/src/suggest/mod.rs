//! The interactive loop: exploit/explore prompt suggestions, goal-aware
//! edit proposals with one-click apply, in-line generation and tool-tips.

mod focus;
mod inline;
mod prompts;
mod proposals;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::gateway::GatewayError;
use crate::model::{ModelError, PlanDocument, PlanSection, SectionId};

pub use crate::ingest::Speaker;
pub use focus::tag_focus;
pub use inline::{inline_generate, inline_request, InlineRequest, InlineResult, MAX_CANDIDATES};
pub use prompts::{fallback_pair, suggest_prompts, suggestion_request, SUGGESTION_CAP};
pub use proposals::{
    apply_edit, parse_proposals, propose_edit, propose_edit_streaming, proposal_request, ParsedReply, ProposeOutcome,
    ProseFilter, RawProposal, MAX_PROPOSALS,
};

/// Turns considered "recent" when picking an exploration target.
pub const RECENCY_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub turn_index: u64,
    pub role: Speaker,
    pub text: String,
    #[serde(default)]
    pub focus_section: Option<SectionId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionKind {
    Exploitation,
    Exploration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSuggestion {
    pub kind: SuggestionKind,
    pub text: String,
    pub target_section: SectionId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditProposal {
    pub proposal_id: String,
    pub base_revision: u64,
    pub target_section: SectionId,
    pub replacement: crate::model::RichText,
    pub rationale: String,
    pub goal_ids: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SuggestError {
    #[error("proposal was made against revision {base} but the document is at {head}")]
    StaleProposal { base: u64, head: u64 },
    #[error("the proposal does not change the section")]
    NoChange,
    #[error("{0}")]
    InvalidRequest(String),
    #[error("the reply contained no usable candidate")]
    NoCandidates,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Section the conversation is currently about.
///
/// The focus of the most recent turn that has one; otherwise the section
/// touched by the latest revision; otherwise the executive summary.
pub fn current_topic(conversation: &[ChatTurn], plan: &PlanDocument) -> SectionId {
    if let Some(section) = conversation.iter().rev().find_map(|t| t.focus_section) {
        return section;
    }
    plan.head_revision().change.section().unwrap_or(SectionId::ExecutiveSummary)
}

/// Focus sections of the last [`RECENCY_WINDOW`] turns.
pub fn recent_focuses(conversation: &[ChatTurn]) -> Vec<SectionId> {
    let start = conversation.len().saturating_sub(RECENCY_WINDOW);
    conversation[start..].iter().filter_map(|t| t.focus_section).collect()
}

/// Least complete section that is neither the current topic nor recently
/// discussed. Ties go to canonical order; if everything is excluded the
/// recency filter is dropped.
pub fn explore_target(conversation: &[ChatTurn], plan: &PlanDocument) -> SectionId {
    let completeness: Vec<f64> = plan.sections().iter().map(|s| s.completeness).collect();
    select_explore_target(&completeness, current_topic(conversation, plan), &recent_focuses(conversation))
}

/// The selection rule behind [`explore_target`], over completeness values
/// indexed by canonical position.
pub fn select_explore_target(completeness: &[f64], current: SectionId, recent: &[SectionId]) -> SectionId {
    let pick = |use_recency: bool| {
        SectionId::ALL
            .into_iter()
            .filter(|s| *s != current && !(use_recency && recent.contains(s)))
            .fold(None, |best: Option<SectionId>, s| match best {
                Some(b) if completeness[b.ordinal()] <= completeness[s.ordinal()] => Some(b),
                _ => Some(s),
            })
    };
    pick(true).or_else(|| pick(false)).expect("eight sections always remain")
}

fn next_index(prior: &[ChatTurn]) -> u64 {
    prior.last().map_or(0, |t| t.turn_index + 1)
}

/// The user turn for `message`, tagged with the section it is about.
pub fn user_turn(prior: &[ChatTurn], plan: &PlanDocument, message: &str) -> ChatTurn {
    ChatTurn {
        turn_index: next_index(prior),
        role: Speaker::User,
        text: message.trim().to_string(),
        focus_section: Some(tag_focus(message).unwrap_or_else(|| current_topic(prior, plan))),
    }
}

/// The two turns a completed chat exchange appends to the conversation.
pub fn exchange_turns(prior: &[ChatTurn], message: &str, outcome: &ProposeOutcome) -> [ChatTurn; 2] {
    let index = next_index(prior);
    let user = ChatTurn {
        turn_index: index,
        role: Speaker::User,
        text: message.trim().to_string(),
        focus_section: Some(outcome.target_section),
    };
    let assistant = ChatTurn {
        turn_index: index + 1,
        role: Speaker::Assistant,
        text: outcome.reply.clone(),
        focus_section: Some(outcome.proposals.first().map_or(outcome.target_section, |p| p.target_section)),
    };
    [user, assistant]
}

pub fn completeness_score(section: &PlanSection) -> f64 {
    crate::model::completeness_score(&section.content)
}

/// Curated questions shown as editor tool-tips for a section.
pub fn tooltip_questions(corpus: &Corpus, section: SectionId) -> Vec<String> {
    corpus.tooltips(section).to_vec()
}
