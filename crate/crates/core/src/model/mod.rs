//! Plan documents, sections, revisions and the rich-text model.

mod document;
mod richtext;
mod section;

pub use document::{
    classify_change, completeness_score, Author, BusinessContext, ChangeClass, ChangeKind, ChangePayload,
    ContextSource, DocumentMeta, DraftPayload, Fact, FactCategory, Goal, ModelError, PlanDocument, PlanSection,
    Revision, RevisionEvent, SUMMARY_CAP,
};
pub use richtext::{Block, Inline, Marks, RichText, RichTextError};
pub use section::{SectionId, UnknownSection};

use chrono::{DateTime, Utc};
use serde::Serialize;

/// Serializes to compact JSON with object keys sorted, the canonical
/// interchange form.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    // serde_json::Map is a BTreeMap (no `preserve_order`), so going through
    // Value sorts every object's keys.
    let value = serde_json::to_value(value).expect("model types always serialize");
    serde_json::to_string(&value).expect("json values always serialize")
}

/// Source of "now", injectable for deterministic tests.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always returns the same instant.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

#[cfg(test)]
mod tests;
