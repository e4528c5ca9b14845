//! "Questions to ask an expert" for a plan and one of its goals, plus the
//! static expert directory.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ExpertProfile};
use crate::gateway::{Gateway, GatewayError, Message, ProviderRequest, Route};
use crate::generator::context_block;
use crate::markup::render_markup;
use crate::model::{PlanDocument, SectionId};

pub const MIN_QUESTIONS: usize = 5;
pub const MAX_QUESTIONS: usize = 8;
const PITCH_MAX_TOKENS: u32 = 600;

const PITCH_SYSTEM_PROMPT: &str = "\
You help a small-business owner prepare to meet an expert such as a banker, grant officer or mentor.
Read the business plan and the owner's goal, then list between 5 and 8 questions the owner should ask the expert.
Focus on the weakest or most uncertain parts of the plan for this goal.
Reply with a numbered list, one question per line, and nothing else.";

const REFORMAT_INSTRUCTION: &str = "\
Please answer again as a numbered list of questions only, one per line, each ending with a question mark.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PitchPrep {
    pub document_id: String,
    pub goal_id: String,
    pub questions: Vec<String>,
    pub generated_at: DateTime<Utc>,
    pub head_at_generation: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum PitchError {
    #[error("the document has no goal `{0}`")]
    UnknownGoal(String),
    #[error("the reply contained no questions")]
    QuestionParseFailed,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// The request `prepare_pitch` sends first.
pub fn pitch_request(plan: &PlanDocument, goal_id: &str) -> Result<ProviderRequest, PitchError> {
    let goal = plan.goal(goal_id).ok_or_else(|| PitchError::UnknownGoal(goal_id.to_string()))?;
    let mut user = format!("Goal: {}", goal.label);
    if !goal.detail.trim().is_empty() {
        user.push_str(&format!(" ({})", goal.detail.trim()));
    }
    user.push_str("\n\n");
    user.push_str(&context_block(plan.context()));
    user.push_str("\nBusiness plan:\n");
    for section in plan.sections() {
        let body = render_markup(&section.content);
        user.push_str(&format!(
            "\n## {}\n{}\n",
            section.section_id.display_name(),
            if body.is_empty() { "(empty)" } else { body.as_str() }
        ));
    }
    Ok(ProviderRequest::new(
        Route::PitchPrep,
        vec![Message::system(PITCH_SYSTEM_PROMPT), Message::user(user.trim_end())],
        PITCH_MAX_TOKENS,
    ))
}

fn strip_list_marker(line: &str) -> Option<&str> {
    if let Some(rest) = line.strip_prefix(['-', '*', '•']) {
        return Some(rest);
    }
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(['.', ')', ':']) {
            return Some(rest);
        }
    }
    let upper = line.get(..1).map(str::to_ascii_uppercase);
    if upper.as_deref() == Some("Q") {
        let digits = line[1..].chars().take_while(char::is_ascii_digit).count();
        if digits > 0 {
            return line[1 + digits..].strip_prefix([':', '.', ')']);
        }
    }
    None
}

fn as_question(text: &str) -> Option<String> {
    let text = text.trim().trim_matches(['"', '“', '”', '*']).trim();
    let text = text.trim_end_matches(['.', ':', ';', '!', '?', ' ']);
    if text.is_empty() {
        return None;
    }
    Some(format!("{text}?"))
}

/// Questions found in a reply: list items, plus unmarked lines that already
/// end with a question mark. Each is normalized to end with `?`.
pub fn parse_questions(reply: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in reply.lines() {
        let line = line.trim();
        let candidate = match strip_list_marker(line) {
            Some(rest) => rest,
            None if line.ends_with('?') => line,
            None => continue,
        };
        if let Some(q) = as_question(candidate) {
            if !out.iter().any(|o| o.eq_ignore_ascii_case(&q)) {
                out.push(q);
            }
        }
    }
    out
}

/// Clamps to 5..=8: extra questions are cut, missing ones are filled with
/// "What is the weakest part of my <section>?" for the least complete
/// sections first.
pub fn clamp_questions(mut questions: Vec<String>, plan: &PlanDocument) -> Vec<String> {
    questions.truncate(MAX_QUESTIONS);
    let mut sections: Vec<(f64, SectionId)> = plan.sections().iter().map(|s| (s.completeness, s.section_id)).collect();
    sections.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, section) in sections {
        if questions.len() >= MIN_QUESTIONS {
            break;
        }
        let filler = format!("What is the weakest part of my {}?", section.display_name());
        if !questions.contains(&filler) {
            questions.push(filler);
        }
    }
    questions
}

pub async fn prepare_pitch(
    gateway: &Gateway,
    plan: &PlanDocument,
    goal_id: &str,
    at: DateTime<Utc>,
) -> Result<PitchPrep, PitchError> {
    let request = pitch_request(plan, goal_id)?;
    let reply = gateway.complete(&request).await?.content;
    let mut questions = parse_questions(&reply);
    if questions.is_empty() {
        let mut retry = request.clone();
        retry.messages.push(Message::assistant(reply));
        retry.messages.push(Message::user(REFORMAT_INSTRUCTION));
        questions = parse_questions(&gateway.complete(&retry).await?.content);
        if questions.is_empty() {
            return Err(PitchError::QuestionParseFailed);
        }
    }
    Ok(PitchPrep {
        document_id: plan.document_id().to_string(),
        goal_id: goal_id.to_string(),
        questions: clamp_questions(questions, plan),
        generated_at: at,
        head_at_generation: plan.head(),
    })
}

/// The expert directory, optionally limited to one focus area. Directory
/// order is preserved.
pub fn list_experts(corpus: &Corpus, focus: Option<SectionId>) -> Vec<ExpertProfile> {
    corpus
        .experts()
        .iter()
        .filter(|e| focus.is_none_or(|f| e.focus_areas.contains(&f)))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::gateway::ProviderResponse;
    use crate::testing::{epoch, sample_document, shipped_corpus, ScriptedBackend};

    #[test]
    fn parses_common_list_shapes() {
        let reply = "Here are some questions:\n1. How much funding should I ask for\n2) What do lenders check first?\n- Is my market analysis convincing.\nQ4: Who else should I talk to\nWhat about insurance?\nNot a question";
        assert_eq!(
            parse_questions(reply),
            [
                "How much funding should I ask for?",
                "What do lenders check first?",
                "Is my market analysis convincing?",
                "Who else should I talk to?",
                "What about insurance?",
            ]
        );
        assert!(parse_questions("Just prose, no list.").is_empty());
    }

    #[test]
    fn clamp_truncates_in_order_and_pads_by_completeness() {
        let doc = sample_document();
        let many: Vec<String> = (0..12).map(|i| format!("Question {i}?")).collect();
        assert_eq!(clamp_questions(many.clone(), &doc), many[..8]);

        let padded = clamp_questions(vec!["One?".into()], &doc);
        assert_eq!(padded.len(), 5);
        assert_eq!(padded[0], "One?");
        let mut order: Vec<_> = doc.sections().iter().map(|s| (s.completeness, s.section_id)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        assert_eq!(padded[1], format!("What is the weakest part of my {}?", order[0].1.display_name()));
    }

    proptest! {
        #[test]
        fn any_reply_yields_five_to_eight(n in 0usize..21, junk in "[a-z ?.]{0,40}") {
            let reply: String = (0..n).map(|i| format!("{}. Question number {i} {junk}\n", i + 1)).collect();
            let parsed = parse_questions(&reply);
            let out = clamp_questions(parsed, &sample_document());
            prop_assert!((MIN_QUESTIONS..=MAX_QUESTIONS).contains(&out.len()));
            prop_assert!(out.iter().all(|q| q.ends_with('?') && q.len() > 1));
        }
    }

    #[tokio::test]
    async fn prepare_pitch_contract() {
        let doc = sample_document();
        let gateway = ScriptedBackend::new(|req| {
            assert_eq!(req.route, Route::PitchPrep);
            assert!(req.messages[1].content.starts_with("Goal: Apply for city grant"));
            Ok(ProviderResponse::stop("1. How much funding can the city grant cover\n2. What records do reviewers need?", "m"))
        })
        .gateway();
        let prep = prepare_pitch(&gateway, &doc, "goal-grant", epoch()).await.unwrap();
        assert_eq!(prep.questions.len(), 5);
        assert!(prep.questions[0].contains("funding"));
        assert_eq!(prep.head_at_generation, doc.head());
        assert_eq!(prep, prepare_pitch(&gateway, &doc, "goal-grant", epoch()).await.unwrap());

        assert!(matches!(
            prepare_pitch(&gateway, &doc, "goal-nope", epoch()).await,
            Err(PitchError::UnknownGoal(_))
        ));
    }

    #[tokio::test]
    async fn unparseable_twice_fails() {
        let calls = Arc::new(AtomicUsize::new(0));
        let counter = calls.clone();
        let gateway = ScriptedBackend::new(move |_| {
            counter.fetch_add(1, Ordering::SeqCst);
            Ok(ProviderResponse::stop("I would rather not list anything.", "m"))
        })
        .gateway();
        let err = prepare_pitch(&gateway, &sample_document(), "goal-grant", epoch()).await.unwrap_err();
        assert!(matches!(err, PitchError::QuestionParseFailed));
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn expert_filtering() {
        let corpus = shipped_corpus();
        assert_eq!(list_experts(&corpus, None).len(), 3);
        let funding = list_experts(&corpus, Some(SectionId::FundingRequest));
        assert!(!funding.is_empty());
        assert!(funding.iter().all(|e| e.focus_areas.contains(&SectionId::FundingRequest)));
        assert!(list_experts(&corpus, Some(SectionId::Appendix)).is_empty());
    }
}
