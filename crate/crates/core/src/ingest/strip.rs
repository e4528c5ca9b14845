//! Markup stripping for fetched pages.

const SKIPPED_ELEMENTS: [&str; 6] = ["script", "style", "noscript", "template", "svg", "title"];
const INLINE_TAGS: [&str; 14] = [
    "a", "abbr", "b", "cite", "code", "em", "i", "mark", "small", "span", "strong", "sub", "sup", "u",
];

/// Removes tags, comments and script/style bodies, decodes entities and
/// collapses whitespace. Repeats until the text is a fixed point, so
/// `strip_markup(strip_markup(x)) == strip_markup(x)`.
pub fn strip_markup(html: &str) -> String {
    let mut current = strip_once(html);
    loop {
        let next = strip_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Text of the first `<title>` element, stripped.
pub fn extract_title(html: &str) -> String {
    let lower = html.to_ascii_lowercase();
    let Some(open) = lower.find("<title") else { return String::new() };
    let Some(start) = lower[open..].find('>').map(|i| open + i + 1) else { return String::new() };
    let end = lower[start..].find("</title").map_or(html.len(), |i| start + i);
    strip_markup(&html[start..end])
}

fn strip_once(html: &str) -> String {
    let bytes = html.as_bytes();
    let mut out = String::with_capacity(html.len());
    let mut i = 0;
    while i < html.len() {
        let c = html[i..].chars().next().expect("in bounds");
        match c {
            '<' => {
                if html[i..].starts_with("<!--") {
                    i = html[i + 4..].find("-->").map_or(html.len(), |j| i + 4 + j + 3);
                    out.push(' ');
                    continue;
                }
                let next = bytes.get(i + 1).copied().unwrap_or(b' ');
                let is_tag_start = next.is_ascii_alphabetic() || matches!(next, b'/' | b'!' | b'?');
                let close = html[i..].find('>').map(|j| i + j);
                match (is_tag_start, close) {
                    (true, Some(close)) => {
                        let inner = &html[i + 1..close];
                        let name = tag_name(inner);
                        i = close + 1;
                        if !inner.starts_with('/') && SKIPPED_ELEMENTS.contains(&name.as_str()) {
                            i = skip_element_body(html, i, &name);
                            out.push(' ');
                        } else if !INLINE_TAGS.contains(&name.as_str()) {
                            out.push(' ');
                        }
                    }
                    _ => {
                        out.push('<');
                        i += 1;
                    }
                }
            }
            '&' => match decode_entity(&html[i..]) {
                Some((decoded, len)) => {
                    out.push(decoded);
                    i += len;
                }
                None => {
                    out.push('&');
                    i += 1;
                }
            },
            _ => {
                out.push(c);
                i += c.len_utf8();
            }
        }
    }
    collapse_whitespace(&out)
}

fn tag_name(inner: &str) -> String {
    inner
        .trim_start_matches('/')
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Index just past `</name ...>`, or the end of input when unterminated.
fn skip_element_body(html: &str, from: usize, name: &str) -> usize {
    let lower = html[from..].to_ascii_lowercase();
    let needle = format!("</{name}");
    match lower.find(&needle) {
        Some(j) => {
            let start = from + j;
            html[start..].find('>').map_or(html.len(), |k| start + k + 1)
        }
        None => html.len(),
    }
}

fn decode_entity(s: &str) -> Option<(char, usize)> {
    let end = s.char_indices().take(12).find(|(_, c)| *c == ';').map(|(i, _)| i)?;
    let body = &s[1..end];
    let decoded = if let Some(num) = body.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse().ok()?,
        };
        char::from_u32(code)?
    } else {
        match body {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" | "#39" => '\'',
            "nbsp" => ' ',
            "mdash" => '—',
            "ndash" => '–',
            "hellip" => '…',
            "lsquo" => '‘',
            "rsquo" => '’',
            "ldquo" => '“',
            "rdquo" => '”',
            "copy" => '©',
            "reg" => '®',
            "trade" => '™',
            _ => return None,
        }
    };
    Some((decoded, end + 1))
}

pub(crate) fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
