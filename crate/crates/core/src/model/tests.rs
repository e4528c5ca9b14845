use std::collections::BTreeMap;

use chrono::Duration;
use proptest::prelude::*;

use super::*;
use crate::testing::{arb_blocks, arb_richtext, empty_sections, epoch, sample_context, sample_document};

fn meta() -> DocumentMeta {
    DocumentMeta { document_id: "doc-1".into(), owner: "acct-1".into(), created_at: epoch() }
}

#[test]
fn new_document_with_empty_sections() {
    let goals = vec![Goal::new("g1", "apply for city grant", "")];
    let doc = PlanDocument::new_document(meta(), sample_context(), goals, empty_sections(), Author::Assistant)
        .unwrap();
    assert_eq!(doc.head(), 0);
    assert_eq!(doc.revisions()[0].change, ChangeKind::FullDraft);
    assert!(doc.sections().iter().all(|s| s.completeness == 0.0));
    let ids: Vec<_> = doc.sections().iter().map(|s| s.section_id).collect();
    assert_eq!(ids, SectionId::ALL.to_vec());
}

#[test]
fn new_document_missing_section() {
    let mut sections = empty_sections();
    sections.remove(&SectionId::FundingRequest);
    let err = PlanDocument::new_document(meta(), sample_context(), vec![], sections, Author::Assistant).unwrap_err();
    assert_eq!(err, ModelError::MissingSection(SectionId::FundingRequest));
}

#[test]
fn new_document_rejects_bad_goals() {
    let dup = vec![Goal::new("g", "a", ""), Goal::new("g", "b", "")];
    assert!(matches!(
        PlanDocument::new_document(meta(), sample_context(), dup, empty_sections(), Author::User),
        Err(ModelError::InvalidGoal(_))
    ));
    let blank = vec![Goal::new("g", "  ", "")];
    assert!(matches!(
        PlanDocument::new_document(meta(), sample_context(), blank, empty_sections(), Author::User),
        Err(ModelError::InvalidGoal(_))
    ));
}

#[test]
fn context_invariants() {
    let mut ctx = sample_context();
    ctx.facts.clear();
    ctx.summary = " ".into();
    assert!(ctx.validate().is_err());
    ctx.summary = "x".repeat(SUMMARY_CAP + 1);
    assert!(ctx.validate().is_err());
    ctx.summary = "ok".into();
    ctx.facts.push(Fact { category: FactCategory::Team, statement: "".into() });
    assert!(ctx.validate().is_err());
}

#[test]
fn replay_empty_history_is_a_gap() {
    assert!(matches!(PlanDocument::replay(&[], &[]), Err(ModelError::GapInHistory(_))));
}

#[test]
fn replay_single_draft() {
    let doc = sample_document();
    let replayed = PlanDocument::replay(doc.revisions(), doc.payloads()).unwrap();
    assert_eq!(replayed.head(), 0);
    assert_eq!(replayed.to_interchange(), doc.to_interchange());
}

#[test]
fn replay_detects_gaps_and_mismatches() {
    let doc = sample_document();
    let t = epoch();
    let content = RichText::new(vec![Block::paragraph("new")]).unwrap();
    let doc = doc.replace_section(SectionId::MarketAnalysis, content.clone(), Author::User, t).unwrap();
    let doc = doc.replace_section(SectionId::Appendix, content, Author::User, t).unwrap();

    let mut revisions = doc.revisions().to_vec();
    revisions.remove(1);
    let mut payloads = doc.payloads().to_vec();
    payloads.remove(1);
    assert!(matches!(PlanDocument::replay(&revisions, &payloads), Err(ModelError::GapInHistory(_))));

    assert!(matches!(
        PlanDocument::replay(doc.revisions(), &doc.payloads()[..2]),
        Err(ModelError::PayloadMismatch(_))
    ));

    let mut swapped = doc.payloads().to_vec();
    swapped.swap(0, 1);
    assert!(matches!(PlanDocument::replay(doc.revisions(), &swapped), Err(ModelError::PayloadMismatch(_))));
}

#[test]
fn style_only_payload_must_keep_text() {
    let doc = sample_document();
    let rev = Revision {
        index: 1,
        parent_index: Some(0),
        author: Author::User,
        change: ChangeKind::StyleOnly(SectionId::Appendix),
        timestamp: epoch(),
    };
    let payload = ChangePayload::Section { content: RichText::new(vec![Block::paragraph("other")]).unwrap() };
    assert!(matches!(doc.apply_event(rev, payload), Err(ModelError::PayloadMismatch(_))));
}

#[test]
fn edit_classification() {
    let doc = sample_document();
    let section = SectionId::CompanyDescription;
    let original = doc.section(section).content.clone();
    let t = epoch();

    assert_eq!(doc.edit_section(section, original.clone(), Author::User, t), Err(ModelError::NoChange));

    let bolded = RichText::new(vec![Block::Paragraph {
        inlines: vec![Inline::styled(original.plain_text(), Marks::BOLD)],
    }])
    .unwrap();
    let styled = doc.edit_section(section, bolded, Author::User, t).unwrap();
    assert_eq!(styled.head_revision().change, ChangeKind::StyleOnly(section));

    let inserted = original.with_inserted(0, vec![Block::heading(2, "Our story")]);
    let ins = doc.edit_section(section, inserted, Author::User, t).unwrap();
    assert_eq!(ins.head_revision().change, ChangeKind::InlineInsert(section));

    let replaced = RichText::new(vec![Block::paragraph("Completely new")]).unwrap();
    let rep = doc.edit_section(section, replaced, Author::User, t).unwrap();
    assert_eq!(rep.head_revision().change, ChangeKind::SectionReplace(section));
    assert_eq!(rep.head_revision().author, Author::User);
}

#[test]
fn insert_blocks_records_inline_insert() {
    let doc = sample_document();
    let blocks = RichText::new(vec![Block::paragraph("Competitors include two cafes.")]).unwrap();
    let next = doc.insert_blocks(SectionId::MarketAnalysis, 1, blocks, Author::User, epoch()).unwrap();
    assert_eq!(next.head_revision().change, ChangeKind::InlineInsert(SectionId::MarketAnalysis));
    assert_eq!(next.section(SectionId::MarketAnalysis).content.blocks().len(), 2);
}

#[test]
fn completeness_examples() {
    assert_eq!(completeness_score(&RichText::empty()), 0.0);

    let long = "x".repeat(250);
    let three = RichText::new(vec![
        Block::paragraph(long.clone()),
        Block::paragraph(long.clone()),
        Block::paragraph(long),
    ])
    .unwrap();
    assert_eq!(completeness_score(&three), 1.0);

    let one = RichText::new(vec![Block::paragraph("y".repeat(300))]).unwrap();
    assert_eq!(completeness_score(&one), 0.25);
}

#[test]
fn interchange_keys_are_sorted_and_compact() {
    let doc = sample_document();
    let text = doc.to_interchange();
    assert!(!text.contains(": ") && !text.contains('\n'));
    let top_keys: Vec<String> = match serde_json::from_str::<serde_json::Value>(&text).unwrap() {
        serde_json::Value::Object(map) => map.keys().cloned().collect(),
        _ => unreachable!(),
    };
    assert_eq!(top_keys, ["context", "document_id", "goals", "head", "owner", "revisions", "sections"]);
    assert!(text.starts_with("{\"context\":"));
}

#[derive(Debug, Clone)]
enum Op {
    Replace(usize, RichText),
    Edit(usize, RichText),
    Insert(usize, usize, RichText),
}

fn arb_op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0usize..9, arb_richtext()).prop_map(|(s, c)| Op::Replace(s, c)),
        (0usize..9, arb_richtext()).prop_map(|(s, c)| Op::Edit(s, c)),
        (0usize..9, 0usize..4, arb_richtext()).prop_map(|(s, i, c)| Op::Insert(s, i, c)),
    ]
}

proptest! {
    #[test]
    fn normalize_is_idempotent(blocks in arb_blocks()) {
        let once = RichText::new(blocks).unwrap();
        prop_assert_eq!(once.normalize(), once.clone());
        let reparsed = RichText::new(once.blocks().to_vec()).unwrap();
        prop_assert_eq!(reparsed, once);
    }

    #[test]
    fn completeness_zero_iff_blank(content in arb_richtext()) {
        let score = completeness_score(&content);
        prop_assert!((0.0..=1.0).contains(&score));
        prop_assert_eq!(score == 0.0, content.plain_text().trim().is_empty());
    }

    #[test]
    fn replay_equals_head(ops in prop::collection::vec(arb_op(), 0..30)) {
        let mut doc = sample_document();
        let mut t = epoch();
        for op in ops {
            t += Duration::seconds(1);
            let next = match op {
                Op::Replace(s, c) => doc.replace_section(SectionId::ALL[s], c, Author::Assistant, t),
                Op::Edit(s, c) => doc.edit_section(SectionId::ALL[s], c, Author::User, t),
                Op::Insert(s, i, c) => doc.insert_blocks(SectionId::ALL[s], i, c, Author::User, t),
            };
            match next {
                Ok(next) => {
                    prop_assert_eq!(next.head(), doc.head() + 1);
                    doc = next;
                }
                Err(ModelError::NoChange) => {}
                Err(other) => prop_assert!(false, "unexpected error {other}"),
            }
            let ids: Vec<_> = doc.sections().iter().map(|s| s.section_id).collect();
            prop_assert_eq!(ids, SectionId::ALL.to_vec());
        }
        for (i, rev) in doc.revisions().iter().enumerate() {
            prop_assert_eq!(rev.index, i as u64);
        }
        let replayed = PlanDocument::replay(doc.revisions(), doc.payloads()).unwrap();
        prop_assert_eq!(replayed.to_interchange(), doc.to_interchange());
        let sections: BTreeMap<_, _> = doc.sections().iter().map(|s| (s.section_id, s.completeness)).collect();
        for s in doc.sections() {
            prop_assert_eq!(sections[&s.section_id], completeness_score(&s.content));
        }
    }
}
