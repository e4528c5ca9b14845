//! The constrained rich-text model shared by the editor, generator and exporter.
//!
//! A document is a flat list of blocks (headings 1..=3, paragraphs, bullet
//! lists). Inline content is a list of text runs carrying a subset of
//! {bold, italic}. Values are always kept in normal form:
//!
//! * whitespace inside a block is collapsed to single spaces and trimmed at
//!   the block edges,
//! * there are no empty runs and adjacent runs never share the same marks,
//! * blocks (and bullet items) without text are dropped,
//! * adjacent bullet lists are merged into one.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Marks {
    pub bold: bool,
    pub italic: bool,
}

impl Marks {
    pub const NONE: Marks = Marks { bold: false, italic: false };
    pub const BOLD: Marks = Marks { bold: true, italic: false };
    pub const ITALIC: Marks = Marks { bold: false, italic: true };
    pub const BOLD_ITALIC: Marks = Marks { bold: true, italic: true };

    pub fn is_empty(self) -> bool {
        !self.bold && !self.italic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Mark {
    Bold,
    Italic,
}

impl Serialize for Marks {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut marks = Vec::with_capacity(2);
        if self.bold {
            marks.push(Mark::Bold);
        }
        if self.italic {
            marks.push(Mark::Italic);
        }
        marks.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Marks {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let marks = Vec::<Mark>::deserialize(deserializer)?;
        Ok(Marks {
            bold: marks.contains(&Mark::Bold),
            italic: marks.contains(&Mark::Italic),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inline {
    pub text: String,
    #[serde(default)]
    pub marks: Marks,
}

impl Inline {
    pub fn plain(text: impl Into<String>) -> Self {
        Inline { text: text.into(), marks: Marks::NONE }
    }

    pub fn styled(text: impl Into<String>, marks: Marks) -> Self {
        Inline { text: text.into(), marks }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Block {
    Heading { level: u8, inlines: Vec<Inline> },
    Paragraph { inlines: Vec<Inline> },
    BulletList { items: Vec<Vec<Inline>> },
}

impl Block {
    pub fn heading(level: u8, text: impl Into<String>) -> Self {
        Block::Heading { level, inlines: vec![Inline::plain(text)] }
    }

    pub fn paragraph(text: impl Into<String>) -> Self {
        Block::Paragraph { inlines: vec![Inline::plain(text)] }
    }

    pub fn bullets<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Block::BulletList {
            items: items.into_iter().map(|s| vec![Inline::plain(s)]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RichTextError {
    #[error("heading level {0} outside 1..=3")]
    HeadingLevel(u8),
}

/// Normalized block content of one plan section.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawRichText")]
pub struct RichText {
    blocks: Vec<Block>,
}

#[derive(Deserialize)]
struct RawRichText {
    blocks: Vec<Block>,
}

impl TryFrom<RawRichText> for RichText {
    type Error = RichTextError;

    fn try_from(raw: RawRichText) -> Result<Self, Self::Error> {
        RichText::new(raw.blocks)
    }
}

impl RichText {
    /// Validates heading levels and brings `blocks` into normal form.
    pub fn new(blocks: Vec<Block>) -> Result<Self, RichTextError> {
        for block in &blocks {
            if let Block::Heading { level, .. } = block {
                if !(1..=3).contains(level) {
                    return Err(RichTextError::HeadingLevel(*level));
                }
            }
        }
        Ok(RichText { blocks: normalize_blocks(blocks) })
    }

    pub fn empty() -> Self {
        RichText::default()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Re-normalizes an already-normal value; always a no-op, kept for the
    /// idempotence property.
    pub fn normalize(&self) -> RichText {
        RichText { blocks: normalize_blocks(self.blocks.clone()) }
    }

    /// Block texts joined by newlines, marks dropped.
    pub fn plain_text(&self) -> String {
        let mut lines = Vec::new();
        for block in &self.blocks {
            match block {
                Block::Heading { inlines, .. } | Block::Paragraph { inlines } => {
                    lines.push(inline_text(inlines))
                }
                Block::BulletList { items } => lines.extend(items.iter().map(|i| inline_text(i))),
            }
        }
        lines.join("\n")
    }

    pub fn non_whitespace_chars(&self) -> usize {
        self.plain_text().chars().filter(|c| !c.is_whitespace()).count()
    }

    /// Same content with every mark removed.
    pub fn without_marks(&self) -> RichText {
        let strip = |inlines: &[Inline]| -> Vec<Inline> {
            inlines.iter().map(|i| Inline::plain(i.text.clone())).collect()
        };
        let blocks = self
            .blocks
            .iter()
            .map(|b| match b {
                Block::Heading { level, inlines } => Block::Heading { level: *level, inlines: strip(inlines) },
                Block::Paragraph { inlines } => Block::Paragraph { inlines: strip(inlines) },
                Block::BulletList { items } => Block::BulletList {
                    items: items.iter().map(|i| strip(i)).collect(),
                },
            })
            .collect();
        RichText { blocks: normalize_blocks(blocks) }
    }

    /// Inserts `blocks` before block index `at` (clamped to the end).
    pub fn with_inserted(&self, at: usize, blocks: Vec<Block>) -> RichText {
        let at = at.min(self.blocks.len());
        let mut out = self.blocks[..at].to_vec();
        out.extend(blocks);
        out.extend_from_slice(&self.blocks[at..]);
        RichText { blocks: normalize_blocks(out) }
    }
}

pub(crate) fn inline_text(inlines: &[Inline]) -> String {
    inlines.iter().map(|i| i.text.as_str()).collect()
}

fn normalize_blocks(blocks: Vec<Block>) -> Vec<Block> {
    let mut out: Vec<Block> = Vec::with_capacity(blocks.len());
    for block in blocks {
        let block = match block {
            Block::Heading { level, inlines } => {
                let inlines = normalize_inlines(&inlines);
                if inlines.is_empty() {
                    continue;
                }
                Block::Heading { level, inlines }
            }
            Block::Paragraph { inlines } => {
                let inlines = normalize_inlines(&inlines);
                if inlines.is_empty() {
                    continue;
                }
                Block::Paragraph { inlines }
            }
            Block::BulletList { items } => {
                let items: Vec<Vec<Inline>> = items
                    .iter()
                    .map(|item| normalize_inlines(item))
                    .filter(|item| !item.is_empty())
                    .collect();
                if items.is_empty() {
                    continue;
                }
                if let Some(Block::BulletList { items: prev }) = out.last_mut() {
                    prev.extend(items);
                    continue;
                }
                Block::BulletList { items }
            }
        };
        out.push(block);
    }
    out
}

/// Collapses whitespace across run boundaries, trims the edges and merges
/// runs with identical marks.
pub(crate) fn normalize_inlines(inlines: &[Inline]) -> Vec<Inline> {
    let mut out: Vec<Inline> = Vec::new();
    let mut pending_space: Option<Marks> = None;
    let push = |out: &mut Vec<Inline>, c: char, marks: Marks| match out.last_mut() {
        Some(last) if last.marks == marks => last.text.push(c),
        _ => out.push(Inline::styled(c.to_string(), marks)),
    };
    for run in inlines {
        for c in run.text.chars() {
            if c.is_whitespace() {
                if !out.is_empty() && pending_space.is_none() {
                    pending_space = Some(run.marks);
                }
            } else {
                if let Some(space_marks) = pending_space.take() {
                    push(&mut out, ' ', space_marks);
                }
                push(&mut out, c, run.marks);
            }
        }
    }
    out
}
