//! Inline placeholder markup shared by templates and models.
//!
//! `<name>` is a placeholder marker. A backslash makes the following
//! character literal, so `\<` and `\>` write angle brackets. Markers do not
//! nest and do not span lines.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("character {offset}: {message}")]
pub struct MarkupError {
    pub offset: usize,
    pub message: String,
}

fn err(offset: usize, message: impl Into<String>) -> MarkupError {
    MarkupError { offset, message: message.into() }
}

/// A marker occurrence; `start..end` are character offsets covering `<...>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PlaceholderSpan {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    /// Literal text with escapes resolved.
    Text(String),
    Marker(String),
}

/// Every maximal `<name>` span, left to right.
pub fn extract_placeholders(text: &str) -> Result<Vec<PlaceholderSpan>, MarkupError> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, String)> = None;
    let mut chars = text.chars().enumerate();
    while let Some((i, c)) = chars.next() {
        match c {
            '\\' => {
                if open.is_some() {
                    return Err(err(i, "escape inside a marker"));
                }
                if chars.next().is_none() {
                    return Err(err(i, "dangling escape at end of text"));
                }
            }
            '<' => {
                if let Some((start, _)) = open {
                    return Err(err(i, format!("nested marker inside marker opened at {start}")));
                }
                open = Some((i, String::new()));
            }
            '>' => match open.take() {
                Some((start, body)) => {
                    let name = body.trim();
                    if name.is_empty() {
                        return Err(err(start, "empty marker"));
                    }
                    spans.push(PlaceholderSpan { name: name.to_string(), start, end: i + 1 });
                }
                None => return Err(err(i, "`>` without matching `<`")),
            },
            '\n' if open.is_some() => {
                let start = open.as_ref().map(|(s, _)| *s).unwrap_or(i);
                return Err(err(start, "marker not closed before end of line"));
            }
            c => {
                if let Some((_, body)) = open.as_mut() {
                    body.push(c);
                }
            }
        }
    }
    if let Some((start, _)) = open {
        return Err(err(start, "`<` without matching `>`"));
    }
    Ok(spans)
}

/// Splits markup into literal runs and markers.
pub fn tokenize(text: &str) -> Result<Vec<Token>, MarkupError> {
    let spans = extract_placeholders(text)?;
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut pos = 0;
    for span in spans {
        if span.start > pos {
            tokens.push(Token::Text(unescape(&chars[pos..span.start])));
        }
        tokens.push(Token::Marker(span.name));
        pos = span.end;
    }
    if pos < chars.len() {
        tokens.push(Token::Text(unescape(&chars[pos..])));
    }
    Ok(tokens)
}

fn unescape(chars: &[char]) -> String {
    let mut out = String::new();
    let mut it = chars.iter();
    while let Some(&c) = it.next() {
        if c == '\\' {
            if let Some(&n) = it.next() {
                out.push(n);
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Escapes a plain string so it reads back as literal text.
pub fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if matches!(c, '\\' | '<' | '>') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

/// Replaces every marker for which `lookup` returns a value; the value is
/// inserted as literal text. Unresolved markers and all other source
/// characters are kept verbatim.
pub fn substitute<'a, F>(text: &str, lookup: F) -> Result<String, MarkupError>
where
    F: Fn(&str) -> Option<&'a str>,
{
    let spans = extract_placeholders(text)?;
    if spans.is_empty() {
        return Ok(text.to_string());
    }
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for span in spans {
        out.extend(&chars[pos..span.start]);
        match lookup(&span.name) {
            Some(value) => out.push_str(&escape_literal(value)),
            None => out.extend(&chars[span.start..span.end]),
        }
        pos = span.end;
    }
    out.extend(&chars[pos..]);
    Ok(out)
}

/// Display form: escapes resolved, markers shown as `<name>`. Invalid markup
/// is returned unchanged.
pub fn to_plain(text: &str) -> String {
    match tokenize(text) {
        Ok(tokens) => tokens
            .into_iter()
            .map(|t| match t {
                Token::Text(s) => s,
                Token::Marker(m) => format!("<{m}>"),
            })
            .collect(),
        Err(_) => text.to_string(),
    }
}

/// Distinct marker names in `text`, in first-occurrence order.
pub fn marker_names(text: &str) -> Result<Vec<String>, MarkupError> {
    let mut names: Vec<String> = Vec::new();
    for span in extract_placeholders(text)? {
        if !names.contains(&span.name) {
            names.push(span.name);
        }
    }
    Ok(names)
}
