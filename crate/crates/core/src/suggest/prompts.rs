//! Two next-prompt suggestions per turn: one on the current topic, one on
//! a new topic.

use crate::gateway::{Gateway, Message, ProviderRequest, Route};
use crate::generator::goals_block;
use crate::model::{PlanDocument, SectionId};

use super::{current_topic, explore_target, ChatTurn, PromptSuggestion, Speaker, SuggestionKind};

/// Maximum characters in a suggestion.
pub const SUGGESTION_CAP: usize = 200;
const HISTORY_TURNS: usize = 6;
const SUGGESTION_MAX_TOKENS: u32 = 160;

const SUGGESTION_SYSTEM_PROMPT: &str = "\
You suggest what a small-business owner could ask their business plan assistant next.
Write each suggestion as a short first-person message the owner could send as is, under 200 characters.
Reply with exactly two lines and nothing else:
EXPLOIT: <a message that digs deeper into the first section named below>
EXPLORE: <a message that starts work on the second section named below>";

/// The request [`suggest_prompts`] sends for a given pair of targets.
pub fn suggestion_request(
    conversation: &[ChatTurn],
    plan: &PlanDocument,
    exploit: SectionId,
    explore: SectionId,
) -> ProviderRequest {
    let mut user = goals_block(plan.goals());
    user.push_str(&format!("\nBusiness: {}\n", plan.context().business_name));
    for (label, section) in [("First section", exploit), ("Second section", explore)] {
        let s = plan.section(section);
        user.push_str(&format!(
            "{label}: {} (about {}% complete)\n",
            section.display_name(),
            (s.completeness * 100.0).round() as u32
        ));
    }
    let start = conversation.len().saturating_sub(HISTORY_TURNS);
    if start < conversation.len() {
        user.push_str("\nRecent conversation:\n");
        for turn in &conversation[start..] {
            let who = match turn.role {
                Speaker::User => "Owner",
                Speaker::Assistant => "Assistant",
            };
            user.push_str(&format!("{who}: {}\n", turn.text.trim()));
        }
    }
    ProviderRequest::new(
        Route::Chat,
        vec![Message::system(SUGGESTION_SYSTEM_PROMPT), Message::user(user.trim_end())],
        SUGGESTION_MAX_TOKENS,
    )
}

/// Static pair used whenever the provider cannot supply one.
pub fn fallback_pair(exploit: SectionId, explore: SectionId) -> [PromptSuggestion; 2] {
    [
        PromptSuggestion {
            kind: SuggestionKind::Exploitation,
            text: format!("Tell me more about improving my {}.", exploit.display_name()),
            target_section: exploit,
        },
        PromptSuggestion {
            kind: SuggestionKind::Exploration,
            text: format!("Let's work on your {}.", explore.display_name()),
            target_section: explore,
        },
    ]
}

fn clean(value: &str) -> Option<String> {
    let value = value.trim().trim_matches(['"', '“', '”']).trim();
    if value.is_empty() {
        return None;
    }
    if value.chars().count() <= SUGGESTION_CAP {
        return Some(value.to_string());
    }
    let cut: String = value.chars().take(SUGGESTION_CAP).collect();
    let cut = match cut.rfind(' ') {
        Some(i) if i > SUGGESTION_CAP / 2 => &cut[..i],
        _ => cut.as_str(),
    };
    Some(cut.trim_end().to_string())
}

fn parse_pair(reply: &str) -> (Option<String>, Option<String>) {
    let mut exploit = None;
    let mut explore = None;
    for line in reply.lines() {
        let line = line.trim().trim_start_matches(['-', '*']).trim();
        let Some((label, value)) = line.split_once(':') else { continue };
        match label.trim().to_ascii_uppercase().as_str() {
            "EXPLOIT" if exploit.is_none() => exploit = clean(value),
            "EXPLORE" if explore.is_none() => explore = clean(value),
            _ => {}
        }
    }
    (exploit, explore)
}

/// Always exactly two suggestions: exploitation on the current topic, then
/// exploration on the explore target. Provider failures and unusable lines
/// fall back to the static templates.
pub async fn suggest_prompts(gateway: &Gateway, conversation: &[ChatTurn], plan: &PlanDocument) -> [PromptSuggestion; 2] {
    let exploit = current_topic(conversation, plan);
    let explore = explore_target(conversation, plan);
    let [mut first, mut second] = fallback_pair(exploit, explore);
    match gateway.complete(&suggestion_request(conversation, plan, exploit, explore)).await {
        Ok(response) => {
            let (a, b) = parse_pair(&response.content);
            if let Some(text) = a {
                first.text = text;
            }
            if let Some(text) = b {
                second.text = text;
            }
        }
        Err(e) => tracing::warn!(error = %e, "prompt suggestions fell back to templates"),
    }
    [first, second]
}
