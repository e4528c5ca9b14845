//! Chat replies that carry section-replacement proposals, and applying them.
//!
//! The suggestions route is asked for prose followed by zero to three
//! blocks of the form
//!
//! ```text
//! PROPOSAL
//! SECTION: executive_summary
//! GOALS: goal-grant, goal-wholesale
//! RATIONALE: one line
//! CONTENT:
//! # Executive Summary
//! ...
//! END PROPOSAL
//! ```

use std::str::FromStr;

use chrono::{DateTime, Utc};

use crate::gateway::{sha256_hex, Gateway, Message, ProviderRequest, Route, TextSink};
use crate::generator::{context_block, goals_block};
use crate::markup::{parse_markup, render_markup};
use crate::model::{to_canonical_json, Author, PlanDocument, RichText, SectionId};

use super::{current_topic, tag_focus, ChatTurn, EditProposal, Speaker, SuggestError};

pub const MAX_PROPOSALS: usize = 3;
const HISTORY_TURNS: usize = 8;
const PROPOSAL_MAX_TOKENS: u32 = 1500;

const PROPOSAL_SYSTEM_PROMPT: &str = "\
You are a business plan assistant helping a small-business owner improve their plan.
Answer the owner in a few plain sentences. When a concrete change to the plan would help, add up to three
proposals after your answer, each in exactly this layout:
PROPOSAL
SECTION: <section id>
GOALS: <comma-separated goal ids this change serves, or none>
RATIONALE: <one sentence>
CONTENT:
<the complete new text of the section>
END PROPOSAL
Section ids: executive_summary, company_description, market_analysis, organization_management,
service_product_line, marketing_sales, funding_request, financial_projections, appendix.
Section text may use `#`/`##`/`###` headings, `- ` bullets, **bold** and *italic*, and blank lines between paragraphs.
Keep every change in line with the owner's business plan goals.";

const REFORMAT_INSTRUCTION: &str = "\
Your proposal blocks did not follow the required layout. Repeat your answer, and write each proposal exactly as
PROPOSAL / SECTION: / GOALS: / RATIONALE: / CONTENT: / END PROPOSAL, with a valid section id and nonempty content.";

/// Result of one chat turn.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposeOutcome {
    pub reply: String,
    pub proposals: Vec<EditProposal>,
    /// Section the request was built around.
    pub target_section: SectionId,
    /// True when proposal blocks stayed malformed after the reformat retry.
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawProposal {
    pub section: SectionId,
    pub goal_ids: Vec<String>,
    pub rationale: String,
    pub content: RichText,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReply {
    pub prose: String,
    pub proposals: Vec<RawProposal>,
    pub malformed: bool,
}

/// The request `propose_edit` sends first.
pub fn proposal_request(
    user_message: &str,
    conversation: &[ChatTurn],
    plan: &PlanDocument,
    target: SectionId,
) -> ProviderRequest {
    let mut messages = vec![Message::system(PROPOSAL_SYSTEM_PROMPT)];
    let start = conversation.len().saturating_sub(HISTORY_TURNS);
    for turn in &conversation[start..] {
        messages.push(match turn.role {
            Speaker::User => Message::user(turn.text.trim()),
            Speaker::Assistant => Message::assistant(turn.text.trim()),
        });
    }
    let section = plan.section(target);
    let body = render_markup(&section.content);
    let mut user = goals_block(plan.goals());
    user.push('\n');
    user.push_str(&context_block(plan.context()));
    user.push_str(&format!(
        "\nSection under discussion: {} ({})\n<<<SECTION>>>\n{}\n<<<END SECTION>>>\n\nOwner: {}",
        target.display_name(),
        target.as_str(),
        if body.is_empty() { "(empty)" } else { body.as_str() },
        user_message.trim()
    ));
    messages.push(Message::user(user));
    ProviderRequest::new(Route::Suggestions, messages, PROPOSAL_MAX_TOKENS)
}

fn reformat_request(first: &ProviderRequest, reply: &str) -> ProviderRequest {
    let mut request = first.clone();
    request.stream = false;
    request.messages.push(Message::assistant(reply));
    request.messages.push(Message::user(REFORMAT_INSTRUCTION));
    request
}

fn parse_section(value: &str) -> Option<SectionId> {
    let value = value.trim().trim_matches(['`', '*']).trim();
    SectionId::from_str(&value.to_ascii_lowercase())
        .ok()
        .or_else(|| SectionId::ALL.into_iter().find(|s| s.display_name().eq_ignore_ascii_case(value)))
}

#[derive(PartialEq)]
enum State {
    Outside,
    Header,
    Content,
}

#[derive(Default)]
struct Pending {
    section: Option<SectionId>,
    goal_ids: Vec<String>,
    rationale: String,
    content: Vec<String>,
}

/// Splits a reply into prose and proposal blocks. Any broken block marks
/// the whole reply malformed.
pub fn parse_proposals(reply: &str) -> ParsedReply {
    let mut prose: Vec<&str> = Vec::new();
    let mut proposals = Vec::new();
    let mut malformed = false;
    let mut state = State::Outside;
    let mut pending = Pending::default();

    let mut finish = |pending: Pending, malformed: &mut bool| {
        let content = parse_markup(&pending.content.join("\n"));
        match pending.section {
            Some(section) if !content.is_empty() => proposals.push(RawProposal {
                section,
                goal_ids: pending.goal_ids,
                rationale: pending.rationale,
                content,
            }),
            _ => *malformed = true,
        }
    };

    for line in reply.lines() {
        let marker = line.trim().to_ascii_uppercase();
        match state {
            State::Outside => {
                if marker == "PROPOSAL" {
                    state = State::Header;
                    pending = Pending::default();
                } else {
                    prose.push(line);
                }
            }
            State::Header => {
                let Some((label, value)) = line.split_once(':') else {
                    if marker == "END PROPOSAL" {
                        malformed = true;
                        state = State::Outside;
                    } else if !marker.is_empty() {
                        malformed = true;
                    }
                    continue;
                };
                let value = value.trim();
                match label.trim().to_ascii_uppercase().as_str() {
                    "SECTION" => match parse_section(value) {
                        Some(s) => pending.section = Some(s),
                        None => malformed = true,
                    },
                    "GOALS" => {
                        pending.goal_ids = value
                            .split(',')
                            .map(|g| g.trim().trim_matches(['[', ']']).to_string())
                            .filter(|g| !g.is_empty() && !g.eq_ignore_ascii_case("none"))
                            .collect();
                    }
                    "RATIONALE" => pending.rationale = value.to_string(),
                    "CONTENT" => {
                        state = State::Content;
                        if !value.is_empty() {
                            pending.content.push(value.to_string());
                        }
                    }
                    _ => malformed = true,
                }
            }
            State::Content => {
                if marker == "END PROPOSAL" {
                    finish(std::mem::take(&mut pending), &mut malformed);
                    state = State::Outside;
                } else if marker == "PROPOSAL" {
                    malformed = true;
                    state = State::Header;
                    pending = Pending::default();
                } else {
                    pending.content.push(line.to_string());
                }
            }
        }
    }
    if state != State::Outside {
        malformed = true;
    }

    ParsedReply { prose: tidy_prose(&prose), proposals, malformed }
}

fn tidy_prose(lines: &[&str]) -> String {
    let mut out = String::new();
    let mut blank = false;
    for line in lines {
        let line = line.trim_end();
        if line.trim().is_empty() {
            blank = !out.is_empty();
            continue;
        }
        if blank {
            out.push_str("\n\n");
        } else if !out.is_empty() {
            out.push('\n');
        }
        blank = false;
        out.push_str(line);
    }
    out
}

fn proposal_id(plan: &PlanDocument, ordinal: usize, raw: &RawProposal) -> String {
    let basis = serde_json::json!({
        "document_id": plan.document_id(),
        "base_revision": plan.head(),
        "ordinal": ordinal,
        "section": raw.section,
        "replacement": raw.content,
    });
    format!("prop-{}", &sha256_hex(to_canonical_json(&basis).as_bytes())[..16])
}

fn build(plan: &PlanDocument, raws: Vec<RawProposal>) -> Vec<EditProposal> {
    raws.into_iter()
        .filter(|raw| raw.content != plan.section(raw.section).content)
        .take(MAX_PROPOSALS)
        .enumerate()
        .map(|(i, raw)| {
            let mut goal_ids: Vec<String> = Vec::new();
            for id in &raw.goal_ids {
                if plan.goal(id).is_some() && !goal_ids.contains(id) {
                    goal_ids.push(id.clone());
                }
            }
            EditProposal {
                proposal_id: proposal_id(plan, i, &raw),
                base_revision: plan.head(),
                target_section: raw.section,
                rationale: raw.rationale.clone(),
                replacement: raw.content,
                goal_ids,
            }
        })
        .collect()
}

fn check_message(user_message: &str) -> Result<(), SuggestError> {
    if user_message.trim().is_empty() {
        return Err(SuggestError::InvalidRequest("message must not be empty".into()));
    }
    Ok(())
}

fn target_for(user_message: &str, conversation: &[ChatTurn], plan: &PlanDocument) -> SectionId {
    tag_focus(user_message).unwrap_or_else(|| current_topic(conversation, plan))
}

async fn finish_turn(
    gateway: &Gateway,
    request: &ProviderRequest,
    plan: &PlanDocument,
    target: SectionId,
    first: String,
) -> ProposeOutcome {
    let parsed = parse_proposals(&first);
    let reply = parsed.prose.clone();
    let outcome = |proposals, degraded| ProposeOutcome { reply: reply.clone(), proposals, target_section: target, degraded };
    if !parsed.malformed {
        return outcome(build(plan, parsed.proposals), false);
    }
    tracing::debug!("proposal blocks malformed, asking for a reformat");
    match gateway.complete(&reformat_request(request, &first)).await {
        Ok(response) => {
            let retry = parse_proposals(&response.content);
            if retry.malformed {
                outcome(Vec::new(), true)
            } else {
                outcome(build(plan, retry.proposals), false)
            }
        }
        Err(e) => {
            tracing::warn!(error = %e, "reformat retry failed");
            outcome(Vec::new(), true)
        }
    }
}

/// One chat turn: the assistant's answer plus up to three proposals, each
/// based on the current head.
pub async fn propose_edit(
    gateway: &Gateway,
    user_message: &str,
    conversation: &[ChatTurn],
    plan: &PlanDocument,
) -> Result<ProposeOutcome, SuggestError> {
    check_message(user_message)?;
    let target = target_for(user_message, conversation, plan);
    let request = proposal_request(user_message, conversation, plan, target);
    let first = gateway.complete(&request).await?.content;
    Ok(finish_turn(gateway, &request, plan, target, first).await)
}

/// Like [`propose_edit`] but streams the prose part of the answer into
/// `sink` as it arrives. Proposal blocks are withheld from the stream.
pub async fn propose_edit_streaming(
    gateway: &Gateway,
    user_message: &str,
    conversation: &[ChatTurn],
    plan: &PlanDocument,
    sink: &mut TextSink<'_>,
) -> Result<ProposeOutcome, SuggestError> {
    check_message(user_message)?;
    let target = target_for(user_message, conversation, plan);
    let request = proposal_request(user_message, conversation, plan, target).streaming();
    let mut filter = ProseFilter::default();
    let mut forward = |delta: &str| {
        let text = filter.push(delta);
        if !text.is_empty() {
            sink(&text);
        }
    };
    let first = gateway.complete_stream(&request, &mut forward).await?.content;
    let rest = filter.finish();
    if !rest.is_empty() {
        sink(&rest);
    }
    Ok(finish_turn(gateway, &request, plan, target, first).await)
}

/// Incremental filter that passes prose through and drops proposal blocks.
#[derive(Debug, Default)]
pub struct ProseFilter {
    line: String,
    emitted: usize,
    in_block: bool,
}

impl ProseFilter {
    pub fn push(&mut self, delta: &str) -> String {
        let mut out = String::new();
        for c in delta.chars() {
            if c == '\n' {
                out.push_str(&self.end_line());
            } else {
                self.line.push(c);
            }
        }
        if !self.in_block && !self.may_be_marker() {
            out.push_str(&self.line[self.emitted..]);
            self.emitted = self.line.len();
        }
        out
    }

    pub fn finish(&mut self) -> String {
        let out = if self.in_block || self.line.trim().eq_ignore_ascii_case("PROPOSAL") {
            String::new()
        } else {
            self.line[self.emitted..].to_string()
        };
        self.line.clear();
        self.emitted = 0;
        out
    }

    fn may_be_marker(&self) -> bool {
        "PROPOSAL".starts_with(self.line.trim().to_ascii_uppercase().as_str())
    }

    fn end_line(&mut self) -> String {
        let marker = self.line.trim().to_ascii_uppercase();
        let out = if self.in_block {
            if marker == "END PROPOSAL" {
                self.in_block = false;
            }
            String::new()
        } else if marker == "PROPOSAL" {
            self.in_block = true;
            String::new()
        } else {
            format!("{}\n", &self.line[self.emitted..])
        };
        self.line.clear();
        self.emitted = 0;
        out
    }
}

/// Applies a proposal as a `section_replace` by the assistant.
pub fn apply_edit(plan: &PlanDocument, proposal: &EditProposal, at: DateTime<Utc>) -> Result<PlanDocument, SuggestError> {
    if proposal.base_revision != plan.head() {
        return Err(SuggestError::StaleProposal { base: proposal.base_revision, head: plan.head() });
    }
    let replacement = proposal.replacement.normalize();
    if replacement == plan.section(proposal.target_section).content {
        return Err(SuggestError::NoChange);
    }
    Ok(plan.replace_section(proposal.target_section, replacement, Author::Assistant, at)?)
}
