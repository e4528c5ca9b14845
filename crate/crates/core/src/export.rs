//! Deterministic export to the fixed nine-section template, as Markdown or
//! standalone HTML.
//!
//! Markdown layout:
//!
//! ```text
//! % <business name>
//! <!-- bizchat: document_id=<id>, head=<n> -->
//!
//! # Executive Summary
//!
//! <section markup, or the placeholder line>
//!
//! # Company Description
//! ...
//! ```
//!
//! LF line endings and exactly one trailing newline.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::markup::{parse_markup, render_markup};
use crate::model::{Block, Inline, PlanDocument, RichText, SectionId};

pub const PLACEHOLDER: &str = "_(To be completed.)_";

const STYLESHEET: &str = "\
body { font-family: Georgia, 'Times New Roman', serif; max-width: 46rem; margin: 2.5rem auto; padding: 0 1.25rem; line-height: 1.55; color: #1d1d1f; }
header.plan-title { font-size: 2.1rem; font-weight: bold; border-bottom: 2px solid #1d1d1f; padding-bottom: 0.4rem; margin-bottom: 1.5rem; }
section { margin-bottom: 2rem; page-break-inside: avoid; }
h1 { font-size: 1.6rem; margin: 1.6rem 0 0.6rem; }
h2 { font-size: 1.3rem; margin: 1.3rem 0 0.5rem; }
h3 { font-size: 1.1rem; margin: 1.1rem 0 0.4rem; }
p.placeholder { color: #6e6e73; }
ul { padding-left: 1.4rem; }
@media print { body { margin: 0; max-width: none; } }";

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn section_body(content: &RichText) -> String {
    let body = render_markup(content);
    if body.is_empty() {
        PLACEHOLDER.to_string()
    } else if body == PLACEHOLDER {
        // A section that literally reads like the placeholder stays distinguishable.
        format!("\\{body}")
    } else {
        body
    }
}

pub fn export_markdown(plan: &PlanDocument) -> Vec<u8> {
    let mut out = String::new();
    let _ = writeln!(out, "% {}", single_line(&plan.context().business_name));
    let _ = writeln!(out, "<!-- bizchat: document_id={}, head={} -->", single_line(plan.document_id()), plan.head());
    for section in plan.sections() {
        let _ = write!(out, "\n# {}\n\n{}\n", section.section_id.display_name(), section_body(&section.content));
    }
    out.into_bytes()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExportParseError {
    #[error("missing heading for `{0}`")]
    MissingSection(SectionId),
}

fn heading_line(section: SectionId) -> String {
    format!("\n# {}\n", section.display_name())
}

/// The raw markup between a section's template heading and the next
/// template heading (or the end of the file).
pub fn section_slice(markdown: &str, section: SectionId) -> Result<&str, ExportParseError> {
    let mut from = 0;
    let mut start = 0;
    for id in SectionId::ALL.into_iter().take(section.ordinal() + 1) {
        let marker = heading_line(id);
        let at = markdown[from..].find(&marker).ok_or(ExportParseError::MissingSection(id))? + from;
        start = at + marker.len();
        from = start;
    }
    let end = match SectionId::ALL.get(section.ordinal() + 1) {
        Some(next) => markdown[start..]
            .find(&heading_line(*next))
            .map(|i| start + i)
            .ok_or(ExportParseError::MissingSection(*next))?,
        None => markdown.len(),
    };
    Ok(&markdown[start..end])
}

/// Reads the sections back out of an exported Markdown file.
pub fn parse_export(markdown: &str) -> Result<BTreeMap<SectionId, RichText>, ExportParseError> {
    SectionId::ALL
        .into_iter()
        .map(|id| {
            let body = section_slice(markdown, id)?.trim();
            let content = if body == PLACEHOLDER { RichText::empty() } else { parse_markup(body) };
            Ok((id, content))
        })
        .collect()
}

fn escape_html(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
}

fn inlines_html(inlines: &[Inline], out: &mut String) {
    for inline in inlines {
        if inline.marks.bold {
            out.push_str("<strong>");
        }
        if inline.marks.italic {
            out.push_str("<em>");
        }
        escape_html(&inline.text, out);
        if inline.marks.italic {
            out.push_str("</em>");
        }
        if inline.marks.bold {
            out.push_str("</strong>");
        }
    }
}

fn block_html(block: &Block, out: &mut String) {
    match block {
        Block::Heading { level, inlines } => {
            let _ = write!(out, "<h{level}>");
            inlines_html(inlines, out);
            let _ = writeln!(out, "</h{level}>");
        }
        Block::Paragraph { inlines } => {
            out.push_str("<p>");
            inlines_html(inlines, out);
            out.push_str("</p>\n");
        }
        Block::BulletList { items } => {
            out.push_str("<ul>\n");
            for item in items {
                out.push_str("<li>");
                inlines_html(item, out);
                out.push_str("</li>\n");
            }
            out.push_str("</ul>\n");
        }
    }
}

pub fn export_html(plan: &PlanDocument) -> Vec<u8> {
    let title = single_line(&plan.context().business_name);
    let mut out = String::from("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    out.push_str("<meta name=\"generator\" content=\"bizchat\">\n<meta name=\"bizchat-document\" content=\"");
    escape_html(&format!("document_id={}, head={}", single_line(plan.document_id()), plan.head()), &mut out);
    out.push_str("\">\n<title>");
    escape_html(&title, &mut out);
    let _ = write!(out, "</title>\n<style>\n{STYLESHEET}\n</style>\n</head>\n<body>\n<header class=\"plan-title\">");
    escape_html(&title, &mut out);
    out.push_str("</header>\n");
    for section in plan.sections() {
        let id = section.section_id;
        let _ = writeln!(out, "<section id=\"{}\">\n<h1>{}</h1>", id.as_str(), id.display_name());
        if section.content.is_empty() {
            out.push_str("<p class=\"placeholder\"><em>(To be completed.)</em></p>\n");
        }
        for block in section.content.blocks() {
            block_html(block, &mut out);
        }
        out.push_str("</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::{Author, DocumentMeta, Marks};
    use crate::testing::{arb_richtext, empty_sections, epoch, sample_context, sample_goals};

    fn document(sections: BTreeMap<SectionId, RichText>) -> PlanDocument {
        PlanDocument::new_document(
            DocumentMeta { document_id: "doc-x".into(), owner: "acct-x".into(), created_at: epoch() },
            sample_context(),
            sample_goals(),
            sections,
            Author::Assistant,
        )
        .unwrap()
    }

    #[test]
    fn empty_document_markdown() {
        let md = String::from_utf8(export_markdown(&document(empty_sections()))).unwrap();
        let mut expected = String::from("% Steel City Roasters\n<!-- bizchat: document_id=doc-x, head=0 -->\n");
        for id in SectionId::ALL {
            expected.push_str(&format!("\n# {}\n\n_(To be completed.)_\n", id.display_name()));
        }
        assert_eq!(md, expected);
        assert!(md.ends_with(")_\n") && !md.ends_with("\n\n") && !md.contains('\r'));
    }

    #[test]
    fn empty_document_html_has_nine_h1_in_order() {
        let html = String::from_utf8(export_html(&document(empty_sections()))).unwrap();
        assert_eq!(html.matches("<h1>").count(), 9);
        let positions: Vec<usize> =
            SectionId::ALL.iter().map(|id| html.find(&format!("<h1>{}</h1>", id.display_name())).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn html_maps_marks_and_escapes() {
        let mut sections = empty_sections();
        sections.insert(
            SectionId::Appendix,
            RichText::new(vec![Block::Paragraph {
                inlines: vec![Inline::styled("bold", Marks::BOLD), Inline::plain(" <b>&"), Inline::styled("both", Marks::BOLD_ITALIC)],
            }])
            .unwrap(),
        );
        let html = String::from_utf8(export_html(&document(sections))).unwrap();
        assert!(html.contains("<p><strong>bold</strong> &lt;b&gt;&amp;<strong><em>both</em></strong></p>"));
    }

    #[test]
    fn placeholder_lookalike_survives() {
        let mut sections = empty_sections();
        sections.insert(SectionId::Appendix, RichText::new(vec![Block::paragraph(PLACEHOLDER)]).unwrap());
        let doc = document(sections.clone());
        let md = String::from_utf8(export_markdown(&doc)).unwrap();
        assert_eq!(parse_export(&md).unwrap(), sections.into_iter().map(|(k, v)| (k, v.normalize())).collect());
    }

    proptest! {
        #[test]
        fn markdown_round_trips(contents in prop::collection::vec(arb_richtext(), 9)) {
            let sections: BTreeMap<SectionId, RichText> = SectionId::ALL.into_iter().zip(contents).collect();
            let doc = document(sections);
            let bytes = export_markdown(&doc);
            prop_assert_eq!(&bytes, &export_markdown(&doc));
            prop_assert_eq!(export_html(&doc), export_html(&doc));
            let md = String::from_utf8(bytes).unwrap();
            prop_assert!(md.ends_with('\n') && !md.ends_with("\n\n"));
            let parsed = parse_export(&md).unwrap();
            for section in doc.sections() {
                prop_assert_eq!(&parsed[&section.section_id], &section.content);
            }
        }
    }
}
