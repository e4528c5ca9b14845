//! Regenerates the offline fixture set and the golden files.
//!
//! Every provider reply below is hand-written. The example replays the
//! shipped scenarios against a scripted backend wrapped in a recorder, so
//! each reply is stored under the exact request key the pipeline produces.
//! Review the diff of `fixture/llm/` and `golden/` before committing.
//!
//! ```text
//! cargo run -p bizchat-core --example author_fixtures
//! ```

use std::collections::HashMap;
use std::sync::Arc;

use bizchat_core::corpus::Corpus;
use bizchat_core::export::{export_html, export_markdown};
use bizchat_core::gateway::{Fixture, FixtureStore, Gateway, GatewayError, ProviderRequest, ProviderResponse, RecordingBackend, RetryPolicy, ModelRouting};
use bizchat_core::generator::{assemble_section_prompt, generate_draft};
use bizchat_core::ingest::{
    chat_input, context_from_chat, context_from_page, extraction_request, page_input, reformat_request, FixtureSites,
    PageSource, TranscriptTurn,
};
use bizchat_core::model::{FixedClock, PlanDocument, SectionId};
use bizchat_core::pitch::{pitch_request, prepare_pitch};
use bizchat_core::suggest::{
    apply_edit, current_topic, exchange_turns, explore_target, inline_generate, inline_request, proposal_request,
    propose_edit, suggest_prompts, suggestion_request, ChatTurn, InlineRequest,
};
use bizchat_core::testing::{coffee, epoch, repo_root, ScriptedBackend};

const MODEL_CHAT: &str = "gpt-3.5-turbo-0125";
const MODEL_SECTION: &str = "gpt-4-turbo-2024-04-09";
const MODEL_SUGGEST: &str = "gpt-4o-mini-2024-07-18";

const COFFEE_EXTRACTION: &str = "\
NAME: Three Rivers Roasting Co.
SUMMARY: Three Rivers Roasting Co. is a small-batch coffee roaster in Pittsburgh's Lawrenceville neighborhood that roasts every bag to order on a 12 kg roaster.
It sells single-origin coffees, two house blends and subscriptions online and at a farmers market, and supplies six cafes and two grocery co-ops.
FACT/offering: Single-origin coffees from Colombia, Ethiopia and Guatemala
FACT/offering: Two house blends, Confluence and Incline, for espresso and drip
FACT/pricing: Subscriptions every two or four weeks, from $17 per 12 oz bag
FACT/location: Shared commercial space on Butler Street in Lawrenceville, Pittsburgh
FACT/stage: Started in 2022; roasted about 9,000 pounds of coffee last year
FACT/team: Founder and roaster José Ramirez; partner Dana Okafor runs sales and the books; two part-time packers
FACT/customers: Six Pittsburgh cafes and two grocery co-ops buy wholesale
FACT/customers: Retail customers order online and visit the Bloomfield farmers market stall
FACT/other: The current roaster is near capacity; a move to a 25 kg roaster is planned";

const ACME_EXTRACTION: &str = "NAME: Acme Co.\nSUMMARY: Acme Co. sells hats.\nFACT/offering: Hats";

const PROSE_REPLY: &str = "This looks like a friendly small business that loves what it does and welcomes visitors.";
const PROSE_RETRY_REPLY: &str = "I am sorry, but the page does not say what the business is or what it sells.";

const PITTSBURGH_EXTRACTION: &str = "\
NAME: Unnamed coffee roaster
SUMMARY: The owner roasts coffee in Pittsburgh.
FACT/offering: Roasted coffee
FACT/location: Pittsburgh";

const BIKE_EXTRACTION: &str = "\
NAME: Spoke & Wrench
SUMMARY: Spoke & Wrench is a mobile bike repair service in Columbus, Ohio that fixes bikes at customers' homes and offices from a converted van.
Tune-ups make up about half of revenue, and three office buildings pay for monthly service visits.
The owner wants to add a second van and a part-time mechanic to meet summer demand.
FACT/offering: Mobile tune-ups ($95 standard, $150 deluxe), flat and brake repairs, and parts sales
FACT/location: Columbus, Ohio, mainly Clintonville and the Short North
FACT/stage: Started on weekends in 2021; full time since last spring
FACT/customers: Commuters, families and three office buildings with bike rooms
FACT/team: The owner plus a part-time booking and invoicing assistant
FACT/other: About 140 five-star online reviews; booked solid April through September";

fn section_reply(section: SectionId) -> &'static str {
    match section {
        SectionId::ExecutiveSummary => "\
# Roasting Pittsburgh's Next Favorite Coffee

Three Rivers Roasting Co. is a **small-batch coffee roaster** in Pittsburgh's Lawrenceville neighborhood. Since opening in 2020, we have roasted every bag to order and built a following among home brewers, six local cafes and two grocery co-ops.

Our roaster is now running near capacity. This plan supports two goals: winning a *city small-business grant* to help buy a 25 kg roaster, and adding six more cafe accounts within a year.

- Roasted about 9,000 pounds of coffee last year
- Wholesale, subscriptions and a weekly farmers market stall
- Led by founder and roaster José Ramirez and partner Dana Okafor",
        SectionId::CompanyDescription => "\
# Who We Are

Three Rivers Roasting Co. started in 2022, when José Ramirez moved his roasting from a borrowed church kitchen into a shared commercial space on Butler Street. José learned to roast while working at a cafe in Medellín and has roasted professionally for eight years.

We roast single-origin coffees and two house blends, *Confluence* and *Incline*, and ship within two days of roasting. Freshness and direct relationships with two importers are what set us apart.

## Legal structure

The business is owned by José Ramirez and Dana Okafor. _Add the registered legal structure and registration date here._",
        SectionId::MarketAnalysis => "\
# The Pittsburgh Coffee Market

Pittsburgh has a growing specialty coffee scene, and Lawrenceville and Bloomfield are two of its busiest neighborhoods for independent cafes. Our customers fall into three groups:

- **Cafes** that want fresh, locally roasted beans and barista support
- **Grocery co-ops** that stock local products
- **Home brewers** who buy subscriptions or visit the farmers market

Most cafes in the area buy from regional or national roasters that ship weekly at best. We compete on freshness, weekly delivery and free equipment cleaning and training.

Our current roaster is near capacity, which limits how many new cafe accounts we can accept.",
        SectionId::OrganizationManagement => "\
# Our Team

José Ramirez, founder and head roaster, manages sourcing, roasting and quality. Dana Okafor, partner, runs wholesale sales, customer service and bookkeeping.

Two part-time packers handle bagging, labeling and shipping. As wholesale grows we expect to add a part-time delivery driver.",
        SectionId::ServiceProductLine => "\
# Our Coffee

We sell three kinds of products:

- Single-origin coffees from **Colombia, Ethiopia and Guatemala**
- Two house blends, *Confluence* for espresso and *Incline* for drip
- Subscriptions every two or four weeks, from $17 per 12 oz bag

Wholesale accounts also receive weekly delivery, free equipment cleaning and barista training. Every bag is roasted to order and shipped within two days.",
        SectionId::MarketingSales => "\
# Reaching Customers

Retail customers find us online and at our Saturday stall at the Bloomfield farmers market, which runs from May through November. Subscriptions turn one-time buyers into repeat customers.

For wholesale, Dana visits cafes with samples and offers barista training as part of every account. Our goal is to add six new cafe accounts within a year once the larger roaster is in place.",
        SectionId::FundingRequest => "\
# Funding Request

We are seeking a city small-business grant to help purchase a 25 kg roaster. The larger machine would roughly double our roasting capacity and let us accept new cafe accounts.

_Add the total cost of the roaster, the grant amount requested and any matching funds here._",
        SectionId::FinancialProjections => "\
# Financial Outlook

Last year we roasted about 9,000 pounds of coffee across wholesale, subscription and farmers market sales. With a larger roaster and six more cafe accounts, we expect wholesale volume to grow steadily over the next two years.

_Add last year's revenue, major costs and a two-year sales forecast here._",
        SectionId::Appendix => "\
# Supporting Documents

- Photos of the roastery and products
- List of current wholesale accounts
- Quote for the 25 kg roaster
- Business registration and food handling permits",
    }
}

const SUGGEST_FRESH: &str = "\
EXPLOIT: Can you make my executive summary mention how the new roaster helps our wholesale goal?
EXPLORE: What should I add to my company description about how we are registered?";

const FIX_REPLY: &str = "\
You're right, the summary says 2020 but Three Rivers Roasting Co. started in 2022. Here is a corrected version.

PROPOSAL
SECTION: executive_summary
GOALS: goal-grant
RATIONALE: The founding year must match the company description and the grant application.
CONTENT:
# Roasting Pittsburgh's Next Favorite Coffee

Three Rivers Roasting Co. is a **small-batch coffee roaster** in Pittsburgh's Lawrenceville neighborhood. Since opening in 2022, we have roasted every bag to order and built a following among home brewers, six local cafes and two grocery co-ops.

Our roaster is now running near capacity. This plan supports two goals: winning a *city small-business grant* to help buy a 25 kg roaster, and adding six more cafe accounts within a year.

- Roasted about 9,000 pounds of coffee last year
- Wholesale, subscriptions and a weekly farmers market stall
- Led by founder and roaster José Ramirez and partner Dana Okafor
END PROPOSAL";

const SUGGEST_AFTER_FIX: &str = "\
EXPLOIT: Can you add a sentence to my executive summary about how much the grant would cover?
EXPLORE: What information should my company description include about our legal structure?";

const MARKET_REPLY: &str = "\
Grant reviewers look for evidence of demand. Naming the cafes you could add and the gap the bigger roaster closes makes the case stronger.

PROPOSAL
SECTION: market_analysis
GOALS: goal-grant, goal-wholesale
RATIONALE: Shows reviewers concrete unmet demand that the new roaster would serve.
CONTENT:
# The Pittsburgh Coffee Market

Pittsburgh has a growing specialty coffee scene, and Lawrenceville and Bloomfield are two of its busiest neighborhoods for independent cafes. Our customers fall into three groups:

- **Cafes** that want fresh, locally roasted beans and barista support
- **Grocery co-ops** that stock local products
- **Home brewers** who buy subscriptions or visit the farmers market

Most cafes in the area buy from regional or national roasters that ship weekly at best. We compete on freshness, weekly delivery and free equipment cleaning and training.

## Unmet demand

We currently turn away new cafe accounts because our roaster is near capacity. A 25 kg roaster would let us serve *six more cafes* within a year, the target set in our wholesale goal.
END PROPOSAL";

const SUGGEST_AFTER_MARKET: &str = "\
EXPLOIT: Can you add numbers on how many cafes are near Lawrenceville to my market analysis?
EXPLORE: Help me fill in the legal structure in my company description.";

const VOICE_REPLY: &str = "\
Your Company Description already says Three Rivers Roasting Co. started in 2022, and the Executive Summary now matches it. There is nothing else to change for the founding year.";

const SUGGEST_AFTER_VOICE: &str = "\
EXPLOIT: What else should my company description say about José's background?
EXPLORE: Can you help me fill in the numbers in my funding request?";

const PITCH_FRESH: &str = "\
1. How much grant funding can a roastery like ours realistically request?
2. Does the city grant require matching funds, and how should I show them?
3. Which costs of the 25 kg roaster can the grant cover, such as installation or ventilation?
4. What financial records do grant reviewers expect from a business that started in 2022?
5. How should I show that new cafe accounts will follow once capacity grows?
6. What makes a market analysis convincing to a grant committee?";

const PITCH_AFTER_SESSION: &str = "\
1. How much funding should I request for the roaster, installation and training?
2. Does the grant require matching funds, and can savings or a small loan count?
3. How should I present the six-cafe wholesale target so reviewers find it credible?
4. Which financial projections do grant reviewers read most closely?
5. What permits or inspections will a larger roaster need before the grant pays out?
6. Who at the city should I talk to before I submit the application?
7. What are the most common reasons small-business grant applications are turned down?";

const INLINE_REPLY: &str = "\
=== CANDIDATE ===
Two nearby roasters, one in the Strip District and one in Millvale, also sell to cafes, but both deliver every other week. Our weekly delivery and free barista training give cafes fresher coffee and more support.
=== CANDIDATE ===
Most of our competition comes from **regional roasters** that ship from outside the city. We win accounts by delivering within days of roasting and by training each cafe's baristas.";

/// A tiny placeholder recording; only its bytes matter for the fixture key.
fn voice_bytes() -> Vec<u8> {
    let mut bytes = vec![0x1A, 0x45, 0xDF, 0xA3, 0x9F, 0x42, 0x86, 0x81, 0x01];
    bytes.extend_from_slice(b"webm placeholder: change the founding year to twenty twenty-two");
    bytes
}

fn scripted(replies: HashMap<String, (&'static str, &'static str)>) -> ScriptedBackend {
    ScriptedBackend::new(move |request: &ProviderRequest| {
        let key = request.fixture_key();
        let (content, model) = replies.get(&key).ok_or(GatewayError::FixtureMiss { key })?;
        Ok(ProviderResponse::stop(*content, *model))
    })
}

struct Author {
    replies: HashMap<String, (&'static str, &'static str)>,
}

impl Author {
    fn reply(&mut self, request: &ProviderRequest, content: &'static str, model: &'static str) {
        self.replies.insert(request.fixture_key(), (content, model));
    }

    fn gateway(&self, store: &Arc<FixtureStore>) -> Gateway {
        Gateway::new(
            Arc::new(RecordingBackend::new(scripted(self.replies.clone()), store.clone())),
            ModelRouting::default(),
            RetryPolicy::none(),
        )
    }
}

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = repo_root();
    let fixture_dir = root.join("fixture");
    let llm_dir = fixture_dir.join("llm");
    if llm_dir.exists() {
        std::fs::remove_dir_all(&llm_dir)?;
    }
    let store = Arc::new(FixtureStore::open(&llm_dir)?);
    let corpus = Corpus::load(root.join("corpus"))?;
    let sites = PageSource::Fixture(FixtureSites::open(&fixture_dir)?);
    let clock = FixedClock(epoch());
    let mut author = Author { replies: HashMap::new() };

    // Website extraction.
    let coffee_page = sites.fetch_and_strip(coffee::URL, &clock).await?;
    author.reply(&extraction_request(&page_input(&coffee_page)), COFFEE_EXTRACTION, MODEL_CHAT);
    let acme_page = sites.fetch_and_strip("https://acme.example/", &clock).await?;
    author.reply(&extraction_request(&page_input(&acme_page)), ACME_EXTRACTION, MODEL_CHAT);
    let prose_page = sites.fetch_and_strip("https://welcome.example/", &clock).await?;
    let prose_first = extraction_request(&page_input(&prose_page));
    author.reply(&prose_first, PROSE_REPLY, MODEL_CHAT);
    author.reply(&reformat_request(&prose_first, PROSE_REPLY), PROSE_RETRY_REPLY, MODEL_CHAT);

    // Chat extraction.
    let pittsburgh = vec![TranscriptTurn { role: bizchat_core::ingest::Speaker::User, text: "I roast coffee in Pittsburgh".into() }];
    author.reply(&extraction_request(&chat_input(&pittsburgh)), PITTSBURGH_EXTRACTION, MODEL_CHAT);
    let transcript: Vec<TranscriptTurn> =
        serde_json::from_str(&std::fs::read_to_string(fixture_dir.join("onboarding_transcript.json"))?)?;
    author.reply(&extraction_request(&chat_input(&transcript)), BIKE_EXTRACTION, MODEL_CHAT);

    // Extract once through the gateway so the contexts below are exactly what the pipeline sees.
    let gateway = author.gateway(&store);
    let context = context_from_page(&gateway, &coffee_page).await?;
    context_from_page(&gateway, &acme_page).await?;
    assert!(context_from_page(&gateway, &prose_page).await.is_err());
    context_from_chat(&gateway, "conv-pittsburgh", &pittsburgh).await?;
    context_from_chat(&gateway, "conv-bike", &transcript).await?;

    // Sections.
    let goals = coffee::goals();
    for section in SectionId::ALL {
        let bundle = assemble_section_prompt(section, &context, &goals, &corpus)?;
        author.reply(&bundle.request(), section_reply(section), MODEL_SECTION);
    }
    let gateway = author.gateway(&store);
    let draft = generate_draft(&gateway, &corpus, &context, &goals, coffee::meta(), &|_| {}).await?;

    // Scripted chat session on the fresh draft.
    let mut conversation: Vec<ChatTurn> = Vec::new();
    let mut plan: PlanDocument = draft.clone();
    let fresh_pair = (current_topic(&conversation, &plan), explore_target(&conversation, &plan));
    author.reply(&suggestion_request(&conversation, &plan, fresh_pair.0, fresh_pair.1), SUGGEST_FRESH, MODEL_CHAT);

    let steps: [(&str, &'static str, &'static str, bool); 3] = [
        (coffee::FIX_MESSAGE, FIX_REPLY, SUGGEST_AFTER_FIX, true),
        (coffee::MARKET_MESSAGE, MARKET_REPLY, SUGGEST_AFTER_MARKET, true),
        (coffee::VOICE_TEXT, VOICE_REPLY, SUGGEST_AFTER_VOICE, false),
    ];
    for (message, reply, suggestions, apply) in steps {
        let target = bizchat_core::suggest::tag_focus(message).unwrap_or_else(|| current_topic(&conversation, &plan));
        author.reply(&proposal_request(message, &conversation, &plan, target), reply, MODEL_SUGGEST);
        let gateway = author.gateway(&store);
        let outcome = propose_edit(&gateway, message, &conversation, &plan).await?;
        assert_eq!(outcome.proposals.len(), usize::from(apply), "{message}");
        conversation.extend(exchange_turns(&conversation, message, &outcome));
        let pair = (current_topic(&conversation, &plan), explore_target(&conversation, &plan));
        author.reply(&suggestion_request(&conversation, &plan, pair.0, pair.1), suggestions, MODEL_CHAT);
        let gateway = author.gateway(&store);
        suggest_prompts(&gateway, &conversation, &plan).await;
        if apply {
            plan = apply_edit(&plan, &outcome.proposals[0], epoch())?;
        }
    }

    // Pitch prep, inline generation and the fresh-draft suggestions.
    author.reply(&pitch_request(&draft, "goal-grant")?, PITCH_FRESH, MODEL_CHAT);
    author.reply(&pitch_request(&plan, "goal-grant")?, PITCH_AFTER_SESSION, MODEL_CHAT);
    let inline = InlineRequest {
        section_id: SectionId::MarketAnalysis,
        criteria: coffee::INLINE_CRITERIA.into(),
        cursor_block: 1,
    };
    author.reply(&inline_request(&inline, &draft), INLINE_REPLY, MODEL_SUGGEST);
    let gateway = author.gateway(&store);
    suggest_prompts(&gateway, &[], &draft).await;
    prepare_pitch(&gateway, &draft, "goal-grant", epoch()).await?;
    prepare_pitch(&gateway, &plan, "goal-grant", epoch()).await?;
    inline_generate(&gateway, &corpus, &inline, &draft).await?;

    // Voice note.
    let voice = voice_bytes();
    std::fs::write(fixture_dir.join(coffee::VOICE_FILE), &voice)?;
    store.insert(Fixture::transcription(&voice, "audio/webm", coffee::VOICE_TEXT))?;

    // Goldens.
    let golden = root.join("golden");
    std::fs::create_dir_all(golden.join("drafts"))?;
    std::fs::create_dir_all(golden.join("export"))?;
    std::fs::write(golden.join("drafts/coffee.json"), draft.to_interchange())?;
    std::fs::write(golden.join("export/coffee.md"), export_markdown(&draft))?;
    std::fs::write(golden.join("export/coffee.html"), export_html(&draft))?;

    // Sanity: the store alone replays the whole draft.
    let replay = Gateway::mock(Arc::new(FixtureStore::open(&llm_dir)?));
    let again = generate_draft(&replay, &corpus, &context, &goals, coffee::meta(), &|_| {}).await?;
    assert_eq!(again.to_interchange(), draft.to_interchange());

    println!("{} fixtures in {}", store.len(), llm_dir.display());
    println!("session head after scripted edits: {}", plan.head());
    Ok(())
}
