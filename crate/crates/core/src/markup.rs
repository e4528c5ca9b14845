//! Constrained lightweight markup: the text contract between the model
//! provider, the rich-text model and the Markdown export.
//!
//! Supported constructs: ATX headings `#`..`###`, `-` (or `*`) bullet lines,
//! blank-line separated paragraphs, `**bold**`, `*italic*` and `***both***`.
//! Inside a block, a run of one, two or three unescaped asterisks toggles
//! italic, bold or both; a backslash escapes any ASCII punctuation. Anything
//! else is kept as literal paragraph text, so parsing never fails.

use crate::model::{Block, Inline, Marks, RichText};

/// Parses provider output (or a Markdown export slice) into normalized rich text.
pub fn parse_markup(raw: &str) -> RichText {
    let mut blocks = Vec::new();
    let mut paragraph: Vec<&str> = Vec::new();
    let mut bullets: Vec<String> = Vec::new();

    fn flush_paragraph(paragraph: &mut Vec<&str>, blocks: &mut Vec<Block>) {
        if !paragraph.is_empty() {
            blocks.push(Block::Paragraph { inlines: parse_inlines(&paragraph.join(" ")) });
            paragraph.clear();
        }
    }
    fn flush_bullets(bullets: &mut Vec<String>, blocks: &mut Vec<Block>) {
        if !bullets.is_empty() {
            blocks.push(Block::BulletList { items: bullets.iter().map(|b| parse_inlines(b)).collect() });
            bullets.clear();
        }
    }

    for line in raw.lines() {
        if line.trim().is_empty() {
            flush_paragraph(&mut paragraph, &mut blocks);
            flush_bullets(&mut bullets, &mut blocks);
            continue;
        }
        if let Some((level, text)) = heading_line(line) {
            flush_paragraph(&mut paragraph, &mut blocks);
            flush_bullets(&mut bullets, &mut blocks);
            blocks.push(Block::Heading { level, inlines: parse_inlines(text) });
            continue;
        }
        if let Some(text) = bullet_line(line) {
            flush_paragraph(&mut paragraph, &mut blocks);
            bullets.push(text.to_string());
            continue;
        }
        if let Some(last) = bullets.last_mut() {
            if line.starts_with(char::is_whitespace) {
                last.push(' ');
                last.push_str(line.trim());
                continue;
            }
            flush_bullets(&mut bullets, &mut blocks);
        }
        paragraph.push(line);
    }
    flush_paragraph(&mut paragraph, &mut blocks);
    flush_bullets(&mut bullets, &mut blocks);

    RichText::new(blocks).expect("parser only emits heading levels 1..=3")
}

fn strip_indent(line: &str) -> &str {
    let spaces = line.bytes().take(3).take_while(|b| *b == b' ').count();
    &line[spaces..]
}

fn heading_line(line: &str) -> Option<(u8, &str)> {
    let line = strip_indent(line);
    let hashes = line.bytes().take_while(|b| *b == b'#').count();
    if !(1..=3).contains(&hashes) {
        return None;
    }
    let rest = &line[hashes..];
    if rest.is_empty() {
        return Some((hashes as u8, ""));
    }
    rest.starts_with([' ', '\t']).then(|| (hashes as u8, rest.trim()))
}

fn bullet_line(line: &str) -> Option<&str> {
    let line = strip_indent(line);
    let mut chars = line.chars();
    match (chars.next(), chars.next()) {
        (Some('-' | '*'), Some(' ' | '\t')) => Some(line[2..].trim()),
        (Some('-' | '*'), None) => Some(""),
        _ => {
            // Ordered list lines become bullets that keep their number.
            let digits = line.bytes().take_while(u8::is_ascii_digit).count();
            let rest = &line[digits..];
            let ordered = digits > 0
                && digits < 10
                && (rest.starts_with(". ") || rest.starts_with(") "));
            ordered.then_some(line)
        }
    }
}

enum Token {
    Text(String),
    Delim { len: usize, literal: bool },
}

fn parse_inlines(text: &str) -> Vec<Inline> {
    let mut tokens: Vec<Token> = Vec::new();
    let mut buf = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.peek() {
                Some(&next) if next.is_ascii_punctuation() => {
                    buf.push(next);
                    chars.next();
                }
                _ => buf.push('\\'),
            },
            '*' => {
                let mut len = 1;
                while chars.peek() == Some(&'*') {
                    chars.next();
                    len += 1;
                }
                if len > 3 {
                    buf.extend(std::iter::repeat_n('*', len));
                } else {
                    if !buf.is_empty() {
                        tokens.push(Token::Text(std::mem::take(&mut buf)));
                    }
                    tokens.push(Token::Delim { len, literal: false });
                }
            }
            _ => buf.push(c),
        }
    }
    if !buf.is_empty() {
        tokens.push(Token::Text(buf));
    }

    // Toggle simulation; a delimiter that opens a mark never closed by the
    // end of the block is demoted to literal text and the pass repeats.
    loop {
        let mut marks = Marks::NONE;
        let mut opened_by: [Option<usize>; 2] = [None, None];
        for (i, token) in tokens.iter().enumerate() {
            if let Token::Delim { len, literal: false } = token {
                if *len != 1 {
                    marks.bold = !marks.bold;
                    opened_by[0] = marks.bold.then_some(i);
                }
                if *len != 2 {
                    marks.italic = !marks.italic;
                    opened_by[1] = marks.italic.then_some(i);
                }
            }
        }
        match opened_by.iter().flatten().min() {
            None => break,
            Some(&i) => {
                if let Token::Delim { literal, .. } = &mut tokens[i] {
                    *literal = true;
                }
            }
        }
    }

    let mut out = Vec::new();
    let mut marks = Marks::NONE;
    for token in tokens {
        match token {
            Token::Text(text) => out.push(Inline::styled(text, marks)),
            Token::Delim { len, literal: true } => out.push(Inline::styled("*".repeat(len), marks)),
            Token::Delim { len, literal: false } => {
                if len != 1 {
                    marks.bold = !marks.bold;
                }
                if len != 2 {
                    marks.italic = !marks.italic;
                }
            }
        }
    }
    out
}

/// Renders rich text with the same mapping `parse_markup` reads. Blocks are
/// separated by one blank line; there is no trailing newline.
pub fn render_markup(text: &RichText) -> String {
    let mut out = String::new();
    for (i, block) in text.blocks().iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        match block {
            Block::Heading { level, inlines } => {
                out.push_str(&"#".repeat(*level as usize));
                out.push(' ');
                out.push_str(&render_inlines(inlines));
            }
            Block::Paragraph { inlines } => out.push_str(&render_inlines(inlines)),
            Block::BulletList { items } => {
                for (j, item) in items.iter().enumerate() {
                    if j > 0 {
                        out.push('\n');
                    }
                    out.push_str("- ");
                    out.push_str(&render_inlines(item));
                }
            }
        }
    }
    out
}

fn toggle_delimiter(from: Marks, to: Marks) -> &'static str {
    match (from.bold != to.bold, from.italic != to.italic) {
        (true, true) => "***",
        (true, false) => "**",
        (false, true) => "*",
        (false, false) => "",
    }
}

fn render_inlines(inlines: &[Inline]) -> String {
    let mut out = String::new();
    let mut current = Marks::NONE;
    for run in inlines {
        out.push_str(toggle_delimiter(current, run.marks));
        current = run.marks;
        for c in run.text.chars() {
            if matches!(c, '\\' | '*') {
                out.push('\\');
            }
            out.push(c);
        }
    }
    out.push_str(toggle_delimiter(current, Marks::NONE));
    escape_block_start(out)
}

/// Escapes text that would otherwise read as a heading, bullet or
/// numbered-list marker at the start of a line.
fn escape_block_start(mut s: String) -> String {
    if s.starts_with(['#', '-']) {
        s.insert(0, '\\');
        return s;
    }
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 && digits < 10 {
        let rest = &s[digits..];
        if rest.starts_with(". ") || rest.starts_with(") ") {
            s.insert(digits, '\\');
        }
    }
    s
}
