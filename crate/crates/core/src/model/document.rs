use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::richtext::RichText;
use super::section::SectionId;

pub const SUMMARY_CAP: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub detail: String,
}

impl Goal {
    pub fn new(id: impl Into<String>, label: impl Into<String>, detail: impl Into<String>) -> Self {
        Goal { id: id.into(), label: label.into(), detail: detail.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactCategory {
    Offering,
    Customers,
    Location,
    Stage,
    Team,
    Pricing,
    Other,
}

impl FactCategory {
    pub const ALL: [FactCategory; 7] = [
        FactCategory::Offering,
        FactCategory::Customers,
        FactCategory::Location,
        FactCategory::Stage,
        FactCategory::Team,
        FactCategory::Pricing,
        FactCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FactCategory::Offering => "offering",
            FactCategory::Customers => "customers",
            FactCategory::Location => "location",
            FactCategory::Stage => "stage",
            FactCategory::Team => "team",
            FactCategory::Pricing => "pricing",
            FactCategory::Other => "other",
        }
    }

    /// Lenient parse used by the extraction parser; unknown labels map to `Other`.
    pub fn from_label(label: &str) -> FactCategory {
        let label = label.trim().to_ascii_lowercase();
        FactCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == label)
            .unwrap_or(FactCategory::Other)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub category: FactCategory,
    pub statement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContextSource {
    Website { url: String },
    Chat { conversation_id: String },
    Manual,
}

/// Structured facts about the business, the seed for draft generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusinessContext {
    pub business_name: String,
    pub summary: String,
    pub facts: Vec<Fact>,
    pub source: ContextSource,
}

impl BusinessContext {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.summary.chars().count() > SUMMARY_CAP {
            return Err(ModelError::InvalidContext(format!(
                "summary longer than {SUMMARY_CAP} characters"
            )));
        }
        if self.facts.iter().any(|f| f.statement.trim().is_empty()) {
            return Err(ModelError::InvalidContext("empty fact statement".into()));
        }
        if self.facts.is_empty() && self.summary.trim().is_empty() {
            return Err(ModelError::InvalidContext("context has neither summary nor facts".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSection {
    pub section_id: SectionId,
    pub content: RichText,
    pub completeness: f64,
}

impl PlanSection {
    pub fn new(section_id: SectionId, content: RichText) -> Self {
        let completeness = completeness_score(&content);
        PlanSection { section_id, content, completeness }
    }
}

/// Heuristic fill level of a section in `[0, 1]`:
/// `min(1, non-whitespace chars / 600)`, halved when the section has fewer
/// than two blocks.
pub fn completeness_score(content: &RichText) -> f64 {
    let chars = content.non_whitespace_chars() as f64;
    let fill = (chars / 600.0).min(1.0);
    let structure = if content.blocks().len() >= 2 { 1.0 } else { 0.5 };
    fill * structure
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    User,
    Assistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "section_id", rename_all = "snake_case")]
pub enum ChangeKind {
    FullDraft,
    SectionReplace(SectionId),
    InlineInsert(SectionId),
    StyleOnly(SectionId),
}

impl ChangeKind {
    pub fn section(self) -> Option<SectionId> {
        match self {
            ChangeKind::FullDraft => None,
            ChangeKind::SectionReplace(s) | ChangeKind::InlineInsert(s) | ChangeKind::StyleOnly(s) => {
                Some(s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub index: u64,
    pub parent_index: Option<u64>,
    pub author: Author,
    pub change: ChangeKind,
    pub timestamp: DateTime<Utc>,
}

/// Everything needed to reconstruct revision 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftPayload {
    pub document_id: String,
    pub owner: String,
    pub goals: Vec<Goal>,
    pub context: BusinessContext,
    pub sections: BTreeMap<SectionId, RichText>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChangePayload {
    FullDraft(DraftPayload),
    /// The complete new content of the section named by the revision.
    Section { content: RichText },
}

/// One entry of a document's append-only history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionEvent {
    pub revision: Revision,
    pub payload: ChangePayload,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("initial sections are missing `{0}`")]
    MissingSection(SectionId),
    #[error("invalid goal: {0}")]
    InvalidGoal(String),
    #[error("invalid business context: {0}")]
    InvalidContext(String),
    #[error("gap in revision history: {0}")]
    GapInHistory(String),
    #[error("payload does not match revision: {0}")]
    PayloadMismatch(String),
    #[error("section content unchanged")]
    NoChange,
}

/// Identity and creation instant for a new document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentMeta {
    pub document_id: String,
    pub owner: String,
    pub created_at: DateTime<Utc>,
}

/// A revisioned, sectioned business plan.
///
/// Values are immutable; every change produces a new document one revision
/// ahead. The full history (revisions plus payloads) travels with the value
/// so it can be persisted and replayed.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanDocument {
    document_id: String,
    owner: String,
    goals: Vec<Goal>,
    context: BusinessContext,
    sections: Vec<PlanSection>,
    revisions: Vec<Revision>,
    payloads: Vec<ChangePayload>,
}

#[derive(Serialize)]
struct InterchangeView<'a> {
    document_id: &'a str,
    owner: &'a str,
    goals: &'a [Goal],
    context: &'a BusinessContext,
    sections: &'a [PlanSection],
    revisions: &'a [Revision],
    head: u64,
}

fn validate_goals(goals: &[Goal]) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for goal in goals {
        if goal.label.trim().is_empty() {
            return Err(ModelError::InvalidGoal(format!("goal `{}` has an empty label", goal.id)));
        }
        if !seen.insert(goal.id.as_str()) {
            return Err(ModelError::InvalidGoal(format!("duplicate goal id `{}`", goal.id)));
        }
    }
    Ok(())
}

impl PlanDocument {
    /// Builds revision 0 from a complete set of initial sections.
    pub fn new_document(
        meta: DocumentMeta,
        context: BusinessContext,
        goals: Vec<Goal>,
        initial_sections: BTreeMap<SectionId, RichText>,
        author: Author,
    ) -> Result<PlanDocument, ModelError> {
        let payload = DraftPayload {
            document_id: meta.document_id,
            owner: meta.owner,
            goals,
            context,
            sections: initial_sections,
        };
        let revision = Revision {
            index: 0,
            parent_index: None,
            author,
            change: ChangeKind::FullDraft,
            timestamp: meta.created_at,
        };
        Self::from_draft(revision, payload)
    }

    fn from_draft(revision: Revision, payload: DraftPayload) -> Result<PlanDocument, ModelError> {
        validate_goals(&payload.goals)?;
        payload.context.validate()?;
        let mut sections = Vec::with_capacity(SectionId::ALL.len());
        for id in SectionId::ALL {
            let content = payload
                .sections
                .get(&id)
                .ok_or(ModelError::MissingSection(id))?
                .normalize();
            sections.push(PlanSection::new(id, content));
        }
        Ok(PlanDocument {
            document_id: payload.document_id.clone(),
            owner: payload.owner.clone(),
            goals: payload.goals.clone(),
            context: payload.context.clone(),
            sections,
            revisions: vec![revision],
            payloads: vec![ChangePayload::FullDraft(payload)],
        })
    }

    /// Reconstructs a document from its recorded history.
    pub fn replay(revisions: &[Revision], payloads: &[ChangePayload]) -> Result<PlanDocument, ModelError> {
        if revisions.len() != payloads.len() {
            return Err(ModelError::PayloadMismatch(format!(
                "{} revisions but {} payloads",
                revisions.len(),
                payloads.len()
            )));
        }
        let mut pairs = revisions.iter().zip(payloads);
        let (first, first_payload) = pairs
            .next()
            .ok_or_else(|| ModelError::GapInHistory("history has no revision 0".into()))?;
        check_position(first, 0)?;
        let mut doc = match (first.change, first_payload) {
            (ChangeKind::FullDraft, ChangePayload::FullDraft(draft)) => {
                Self::from_draft(first.clone(), draft.clone())?
            }
            (ChangeKind::FullDraft, _) => {
                return Err(ModelError::PayloadMismatch("revision 0 needs a full draft payload".into()))
            }
            _ => return Err(ModelError::PayloadMismatch("revision 0 must be a full draft".into())),
        };
        for (i, (revision, payload)) in pairs.enumerate() {
            check_position(revision, i as u64 + 1)?;
            doc = doc.apply_event(revision.clone(), payload.clone())?;
        }
        Ok(doc)
    }

    /// Appends one recorded event, validating it against the current state.
    pub fn apply_event(&self, revision: Revision, payload: ChangePayload) -> Result<PlanDocument, ModelError> {
        check_position(&revision, self.head() + 1)?;
        let section = revision.change.section().ok_or_else(|| {
            ModelError::PayloadMismatch(format!("revision {} is a second full draft", revision.index))
        })?;
        let content = match &payload {
            ChangePayload::Section { content } => content.normalize(),
            ChangePayload::FullDraft(_) => {
                return Err(ModelError::PayloadMismatch(format!(
                    "revision {} carries a full draft payload",
                    revision.index
                )))
            }
        };
        let old = &self.section(section).content;
        match revision.change {
            ChangeKind::StyleOnly(_) if classify_change(old, &content) != Some(ChangeClass::StyleOnly) => {
                return Err(ModelError::PayloadMismatch(format!(
                    "revision {} is style_only but changes text",
                    revision.index
                )))
            }
            ChangeKind::InlineInsert(_) if classify_change(old, &content) != Some(ChangeClass::Insert) => {
                return Err(ModelError::PayloadMismatch(format!(
                    "revision {} is inline_insert but is not an insertion",
                    revision.index
                )))
            }
            _ => {}
        }
        let mut next = self.clone();
        next.sections[section.ordinal()] = PlanSection::new(section, content);
        next.revisions.push(revision);
        next.payloads.push(payload);
        Ok(next)
    }

    fn commit(
        &self,
        change: ChangeKind,
        content: RichText,
        author: Author,
        at: DateTime<Utc>,
    ) -> Result<PlanDocument, ModelError> {
        let head = self.head();
        let revision = Revision {
            index: head + 1,
            parent_index: Some(head),
            author,
            change,
            timestamp: at,
        };
        self.apply_event(revision, ChangePayload::Section { content })
    }

    /// Replaces a section wholesale (`section_replace`).
    pub fn replace_section(
        &self,
        section: SectionId,
        content: RichText,
        author: Author,
        at: DateTime<Utc>,
    ) -> Result<PlanDocument, ModelError> {
        self.commit(ChangeKind::SectionReplace(section), content, author, at)
    }

    /// Inserts blocks before `at_block`, recorded as `inline_insert`.
    pub fn insert_blocks(
        &self,
        section: SectionId,
        at_block: usize,
        blocks: RichText,
        author: Author,
        at: DateTime<Utc>,
    ) -> Result<PlanDocument, ModelError> {
        if blocks.is_empty() {
            return Err(ModelError::NoChange);
        }
        let old = &self.section(section).content;
        let content = old.with_inserted(at_block, blocks.into_blocks());
        // Inserting next to a bullet list can merge into it; record that as a replace.
        let change = match classify_change(old, &content) {
            Some(ChangeClass::Insert) => ChangeKind::InlineInsert(section),
            _ => ChangeKind::SectionReplace(section),
        };
        self.commit(change, content, author, at)
    }

    /// Records an edit, choosing the narrowest change kind that describes it.
    pub fn edit_section(
        &self,
        section: SectionId,
        content: RichText,
        author: Author,
        at: DateTime<Utc>,
    ) -> Result<PlanDocument, ModelError> {
        let content = content.normalize();
        let change = match classify_change(&self.section(section).content, &content) {
            None => return Err(ModelError::NoChange),
            Some(ChangeClass::StyleOnly) => ChangeKind::StyleOnly(section),
            Some(ChangeClass::Insert) => ChangeKind::InlineInsert(section),
            Some(ChangeClass::Replace) => ChangeKind::SectionReplace(section),
        };
        self.commit(change, content, author, at)
    }

    pub fn document_id(&self) -> &str {
        &self.document_id
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn goals(&self) -> &[Goal] {
        &self.goals
    }

    pub fn goal(&self, id: &str) -> Option<&Goal> {
        self.goals.iter().find(|g| g.id == id)
    }

    pub fn context(&self) -> &BusinessContext {
        &self.context
    }

    pub fn sections(&self) -> &[PlanSection] {
        &self.sections
    }

    pub fn section(&self, id: SectionId) -> &PlanSection {
        &self.sections[id.ordinal()]
    }

    pub fn revisions(&self) -> &[Revision] {
        &self.revisions
    }

    pub fn payloads(&self) -> &[ChangePayload] {
        &self.payloads
    }

    pub fn head(&self) -> u64 {
        self.revisions.len() as u64 - 1
    }

    pub fn head_revision(&self) -> &Revision {
        self.revisions.last().expect("documents always have revision 0")
    }

    /// The full history as events, oldest first.
    pub fn history(&self) -> Vec<RevisionEvent> {
        self.revisions
            .iter()
            .zip(&self.payloads)
            .map(|(revision, payload)| RevisionEvent { revision: revision.clone(), payload: payload.clone() })
            .collect()
    }

    /// Canonical interchange serialization: key-sorted, compact UTF-8 JSON.
    pub fn to_interchange(&self) -> String {
        let view = InterchangeView {
            document_id: &self.document_id,
            owner: &self.owner,
            goals: &self.goals,
            context: &self.context,
            sections: &self.sections,
            revisions: &self.revisions,
            head: self.head(),
        };
        super::to_canonical_json(&view)
    }

    /// Interchange bytes of a single section, used for locality checks.
    pub fn section_interchange(&self, id: SectionId) -> String {
        super::to_canonical_json(self.section(id))
    }
}

fn check_position(revision: &Revision, expected: u64) -> Result<(), ModelError> {
    if revision.index != expected {
        return Err(ModelError::GapInHistory(format!(
            "expected revision {expected}, found {}",
            revision.index
        )));
    }
    let parent = expected.checked_sub(1);
    if revision.parent_index != parent {
        return Err(ModelError::GapInHistory(format!(
            "revision {expected} has parent {:?}, expected {:?}",
            revision.parent_index, parent
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeClass {
    StyleOnly,
    Insert,
    Replace,
}

/// Classifies the edit from `old` to `new`; `None` when they are equal.
pub fn classify_change(old: &RichText, new: &RichText) -> Option<ChangeClass> {
    if old == new {
        return None;
    }
    if old.without_marks() == new.without_marks() {
        return Some(ChangeClass::StyleOnly);
    }
    let (old_blocks, new_blocks) = (old.blocks(), new.blocks());
    if new_blocks.len() > old_blocks.len() {
        let prefix = old_blocks.iter().zip(new_blocks).take_while(|(a, b)| a == b).count();
        let suffix = old_blocks[prefix..]
            .iter()
            .rev()
            .zip(new_blocks.iter().rev())
            .take_while(|(a, b)| a == b)
            .count();
        if prefix + suffix == old_blocks.len() {
            return Some(ChangeClass::Insert);
        }
    }
    Some(ChangeClass::Replace)
}
