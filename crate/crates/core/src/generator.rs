//! Few-shot, per-section draft generation.
//!
//! Each section gets its own `section_generation` request built from the
//! goals, the business context and the first `k` corpus exemplars. The nine
//! requests run concurrently and the replies are assembled in canonical
//! order, so arrival order never shows up in the result.

use std::collections::BTreeMap;

use futures::future::try_join_all;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Exemplar};
use crate::gateway::{Gateway, GatewayError, Message, ProviderRequest, Route};
use crate::markup::parse_markup;
use crate::model::{Author, BusinessContext, DocumentMeta, Goal, ModelError, PlanDocument, RichText, SectionId};

/// Exemplars included per prompt when the corpus has enough.
pub const EXEMPLARS_PER_PROMPT: usize = 2;
pub const SECTION_MAX_TOKENS: u32 = 1200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub section_id: SectionId,
    pub system: String,
    pub user: String,
    pub k: usize,
}

impl PromptBundle {
    pub fn request(&self) -> ProviderRequest {
        ProviderRequest::new(
            Route::SectionGeneration,
            vec![Message::system(&self.system), Message::user(&self.user)],
            SECTION_MAX_TOKENS,
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("the corpus has no exemplar for `{0}`")]
    NoExemplar(SectionId),
    #[error("generating `{section}` failed: {cause}")]
    SectionGenerationFailed { section: SectionId, cause: GatewayError },
    #[error("the reply for `{0}` contained no usable text")]
    PartialParse(SectionId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

const FORMAT_RULES: &str = "\
Format rules:
- Use `#`, `##` or `###` at the start of a line for headings (three levels at most).
- Separate paragraphs with a blank line.
- Start bullet lines with `- `.
- Use **bold** and *italic* for emphasis. No other markup, tables, links or HTML.";

fn section_guidance(section: SectionId) -> &'static str {
    match section {
        SectionId::ExecutiveSummary => {
            "Summarize what the business does, where it stands today, its main goal and what it is asking for."
        }
        SectionId::CompanyDescription => {
            "Describe the company: history, legal structure, location, what sets it apart and who it serves."
        }
        SectionId::MarketAnalysis => {
            "Describe the target market, its size, customer needs and the main competitors, with numbers where the context provides them."
        }
        SectionId::OrganizationManagement => {
            "Describe ownership, the people who run the business and how responsibilities are split."
        }
        SectionId::ServiceProductLine => {
            "Describe what the business sells, how each offering helps customers and what is planned next."
        }
        SectionId::MarketingSales => "Describe how the business attracts and keeps customers and how sales happen.",
        SectionId::FundingRequest => {
            "State how much funding is needed, what it will pay for and how it fits the plan's goals."
        }
        SectionId::FinancialProjections => {
            "Give a narrative outlook of revenue, major costs and timing. Do not invent precise figures the context does not support."
        }
        SectionId::Appendix => "List the supporting documents a reader of this plan should expect to find.",
    }
}

fn system_prompt(section: SectionId) -> String {
    format!(
        "You are helping a small-business owner write the {name} section of a business plan.\n\
         {guidance}\n\
         Write in plain, direct language for a lender or grant reviewer. Use only facts from the business context; \
         where something is unknown, write a short placeholder sentence the owner can fill in.\n\
         Reply with the section text only. Open with a level-1 heading that gives the section a short title of its own \
         (not just \"{name}\"), and use level-2 or level-3 headings for any sub-parts.\n\n\
         {FORMAT_RULES}",
        name = section.display_name(),
        guidance = section_guidance(section),
    )
}

pub fn goals_block(goals: &[Goal]) -> String {
    let mut out = String::from("Business plan goals:\n");
    if goals.is_empty() {
        out.push_str("- (none stated)\n");
    }
    for goal in goals {
        out.push_str(&format!("- [{}] {}", goal.id, goal.label));
        if !goal.detail.trim().is_empty() {
            out.push_str(&format!(": {}", goal.detail.trim()));
        }
        out.push('\n');
    }
    out
}

pub fn context_block(context: &BusinessContext) -> String {
    let mut out = format!("Business context:\nName: {}\n", context.business_name);
    if !context.summary.is_empty() {
        out.push_str(&format!("Summary: {}\n", context.summary));
    }
    if !context.facts.is_empty() {
        out.push_str("Facts:\n");
        for fact in &context.facts {
            out.push_str(&format!("- ({}) {}\n", fact.category.as_str(), fact.statement));
        }
    }
    out
}

fn exemplar_block(index: usize, k: usize, exemplar: &Exemplar) -> String {
    format!(
        "<<<EXAMPLE {index} OF {k}: {title}>>>\n{body}\n<<<END EXAMPLE {index} OF {k}>>>\n",
        title = exemplar.title,
        body = exemplar.body,
    )
}

/// Builds the prompt for one section. Pure in its arguments and corpus order.
pub fn assemble_section_prompt(
    section: SectionId,
    context: &BusinessContext,
    goals: &[Goal],
    corpus: &Corpus,
) -> Result<PromptBundle, GenerateError> {
    let exemplars = corpus.exemplars(section);
    if exemplars.is_empty() {
        return Err(GenerateError::NoExemplar(section));
    }
    let k = exemplars.len().min(EXEMPLARS_PER_PROMPT);
    let mut user = goals_block(goals);
    user.push('\n');
    user.push_str(&context_block(context));
    user.push_str(&format!(
        "\nHere {} from other business plans. Match their level of detail, not their facts.\n\n",
        if k == 1 { "is an example section".to_string() } else { format!("are {k} example sections") }
    ));
    for (i, exemplar) in exemplars.iter().take(k).enumerate() {
        user.push_str(&exemplar_block(i + 1, k, exemplar));
        user.push('\n');
    }
    user.push_str(&format!(
        "Now write the {} section for this business, keeping its goals in mind.",
        section.display_name()
    ));
    Ok(PromptBundle { section_id: section, system: system_prompt(section), user, k })
}

/// Parses a section reply. Total: unknown constructs degrade to paragraphs.
pub fn parse_section_response(raw: &str) -> RichText {
    parse_markup(raw)
}

/// Generates all nine sections and assembles revision 0.
///
/// `progress` fires once per section as its reply is parsed, in arrival
/// order. Any failure aborts the whole draft.
pub async fn generate_draft(
    gateway: &Gateway,
    corpus: &Corpus,
    context: &BusinessContext,
    goals: &[Goal],
    meta: DocumentMeta,
    progress: &(dyn Fn(SectionId) + Send + Sync),
) -> Result<PlanDocument, GenerateError> {
    context.validate()?;
    let bundles = SectionId::ALL
        .into_iter()
        .map(|section| assemble_section_prompt(section, context, goals, corpus))
        .collect::<Result<Vec<_>, _>>()?;

    let replies = try_join_all(bundles.iter().map(|bundle| async move {
        let section = bundle.section_id;
        let response = gateway
            .complete(&bundle.request())
            .await
            .map_err(|cause| GenerateError::SectionGenerationFailed { section, cause })?;
        let content = parse_section_response(&response.content);
        if content.is_empty() {
            return Err(GenerateError::PartialParse(section));
        }
        progress(section);
        Ok((section, content))
    }))
    .await?;

    let sections: BTreeMap<SectionId, RichText> = replies.into_iter().collect();
    Ok(PlanDocument::new_document(meta, context.clone(), goals.to_vec(), sections, Author::Assistant)?)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use parking_lot::Mutex;

    use super::*;
    use crate::gateway::{Fixture, FixtureStore, ProviderResponse};
    use crate::model::Block;
    use crate::testing::{epoch, sample_context, sample_goals, shipped_corpus};

    fn meta() -> DocumentMeta {
        DocumentMeta { document_id: "doc-t".into(), owner: "acct-t".into(), created_at: epoch() }
    }

    fn store_for(corpus: &Corpus, skip: Option<SectionId>) -> Arc<FixtureStore> {
        let store = FixtureStore::in_memory();
        for section in SectionId::ALL.into_iter().filter(|s| Some(*s) != skip) {
            let bundle = assemble_section_prompt(section, &sample_context(), &sample_goals(), corpus).unwrap();
            let reply = format!("# {}\n\nText for **{}**.", section.display_name(), section.as_str());
            store.insert(Fixture::completion(&bundle.request(), ProviderResponse::stop(reply, "m"))).unwrap();
        }
        Arc::new(store)
    }

    #[test]
    fn k_follows_corpus_size() {
        let corpus = shipped_corpus();
        let ma = assemble_section_prompt(SectionId::MarketAnalysis, &sample_context(), &sample_goals(), &corpus).unwrap();
        assert_eq!(ma.k, 2);
        let bodies = corpus.exemplars(SectionId::MarketAnalysis);
        assert!(ma.user.contains(&bodies[0].body) && ma.user.contains(&bodies[1].body));
        assert!(!ma.user.contains(&bodies[2].body));
        assert_eq!(ma.user.matches("<<<EXAMPLE ").count(), 2);
        assert_eq!(ma.user.matches("<<<END EXAMPLE ").count(), 2);
        assert!(ma.user.find(&bodies[0].body) < ma.user.find(&bodies[1].body));

        let ap = assemble_section_prompt(SectionId::Appendix, &sample_context(), &sample_goals(), &corpus).unwrap();
        assert_eq!(ap.k, 1);
        assert_eq!(ap.user.matches("<<<EXAMPLE ").count(), 1);
    }

    #[test]
    fn prompts_are_deterministic_and_carry_goals() {
        let corpus = shipped_corpus();
        let a = assemble_section_prompt(SectionId::FundingRequest, &sample_context(), &sample_goals(), &corpus).unwrap();
        let b = assemble_section_prompt(SectionId::FundingRequest, &sample_context(), &sample_goals(), &corpus).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.request().fixture_key(), b.request().fixture_key());
        assert!(a.user.contains("[goal-grant] Apply for city grant"));
        assert!(a.user.contains("Steel City Roasters"));
        assert!(a.system.contains("the Funding Request section"));
    }

    #[test]
    fn missing_exemplars_are_reported() {
        let corpus = shipped_corpus().with_exemplars(SectionId::Appendix, Vec::new());
        assert!(matches!(
            assemble_section_prompt(SectionId::Appendix, &sample_context(), &sample_goals(), &corpus),
            Err(GenerateError::NoExemplar(SectionId::Appendix))
        ));
    }

    #[test]
    fn section_parser_examples() {
        let rt = parse_section_response("# Summary\n\nWe roast.");
        assert_eq!(rt.blocks(), [Block::heading(1, "Summary"), Block::paragraph("We roast.")]);
        let rt = parse_section_response("- a\n- b");
        assert_eq!(rt.blocks(), [Block::bullets(["a", "b"])]);
        let rt = parse_section_response("<b>x</b>");
        assert_eq!(rt.blocks(), [Block::paragraph("<b>x</b>")]);
    }

    #[tokio::test]
    async fn draft_assembles_in_canonical_order() {
        let corpus = shipped_corpus();
        let gateway = Gateway::mock(store_for(&corpus, None));
        let seen = Mutex::new(Vec::new());
        let doc = generate_draft(&gateway, &corpus, &sample_context(), &sample_goals(), meta(), &|s| seen.lock().push(s))
            .await
            .unwrap();
        assert_eq!(doc.head(), 0);
        let ids: Vec<_> = doc.sections().iter().map(|s| s.section_id).collect();
        assert_eq!(ids, SectionId::ALL);
        assert!(doc.sections().iter().all(|s| s.completeness > 0.0));
        let mut seen = seen.into_inner();
        seen.sort();
        assert_eq!(seen, SectionId::ALL);
    }

    #[tokio::test]
    async fn one_missing_fixture_aborts_the_draft() {
        let corpus = shipped_corpus();
        let gateway = Gateway::mock(store_for(&corpus, Some(SectionId::MarketingSales)));
        let err = generate_draft(&gateway, &corpus, &sample_context(), &sample_goals(), meta(), &|_| {})
            .await
            .unwrap_err();
        assert!(
            matches!(err, GenerateError::SectionGenerationFailed { section: SectionId::MarketingSales, .. }),
            "{err:?}"
        );
    }

    #[tokio::test]
    async fn blank_reply_is_a_partial_parse() {
        let corpus = shipped_corpus();
        let store = store_for(&corpus, Some(SectionId::Appendix));
        let bundle = assemble_section_prompt(SectionId::Appendix, &sample_context(), &sample_goals(), &corpus).unwrap();
        store.insert(Fixture::completion(&bundle.request(), ProviderResponse::stop("#\n\n- \n", "m"))).unwrap();
        let gateway = Gateway::mock(store);
        let err = generate_draft(&gateway, &corpus, &sample_context(), &sample_goals(), meta(), &|_| {})
            .await
            .unwrap_err();
        assert!(matches!(err, GenerateError::PartialParse(SectionId::Appendix)), "{err:?}");
    }
}
