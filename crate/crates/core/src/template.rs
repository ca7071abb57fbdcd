//! Semi-structured plan template documents.
//!
//! ```text
//! @title Local Flood Emergency Sub Plan Template
//!
//! # Response [phase:response]
//! ## Road Information [model:goal]
//!
//! [mof:m1]
//! goal: Providing Road Information Service (RIS)
//! responsible: <SES LN> SESLHQ
//! ```
//!
//! Headings start with one or more `#` and may end with `[phase:...]` and
//! `[model:...]` annotations, inherited by nested sections. Each blank-line
//! separated block under a heading is one element. An element may open with a
//! `[mof:m0]` or `[mof:m1]` mark. Body text uses the inline markup of
//! [`crate::markup`].

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::Serialize;

use crate::axes::{AbmKind, MofLevel, PhaseId};
use crate::markup::{self, PlaceholderSpan};
use crate::text::short_hash;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("no element with id `{0}`")]
    NotFound(String),
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> TemplateError {
    TemplateError::Parse { line, column, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Section {
    pub level: usize,
    pub title: String,
    /// Titles from the outermost heading down to this one.
    pub path: Vec<String>,
    /// Annotations written on this heading only.
    pub phase: Option<PhaseId>,
    pub models: Vec<AbmKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TemplateElement {
    pub id: String,
    pub section_path: Vec<String>,
    /// Index into [`DisplanTemplate::sections`].
    pub section: usize,
    /// Phase inherited from the nearest phase-annotated heading.
    pub phase: Option<PhaseId>,
    /// Raw markup, placeholder markers intact.
    pub text: String,
    pub mof: Option<MofLevel>,
    /// Model-kind hints from the nearest model-annotated heading.
    pub hints: Vec<AbmKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Occurrence {
    pub element: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Placeholder {
    pub name: String,
    pub occurrences: Vec<Occurrence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisplanTemplate {
    title: String,
    phases_covered: BTreeSet<PhaseId>,
    sections: Vec<Section>,
    elements: Vec<TemplateElement>,
    placeholders: Vec<Placeholder>,
}

impl DisplanTemplate {
    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn phases_covered(&self) -> &BTreeSet<PhaseId> {
        &self.phases_covered
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn elements(&self) -> &[TemplateElement] {
        &self.elements
    }

    pub fn element(&self, id: &str) -> Option<&TemplateElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    /// Distinct marker names with their occurrences, sorted by name.
    pub fn placeholders(&self) -> &[Placeholder] {
        &self.placeholders
    }

    pub fn parse(doc: &str) -> Result<DisplanTemplate, TemplateError> {
        parse_template(doc)
    }

    /// Returns a copy with one element's MOF mark changed.
    pub fn set_mof_level(&self, element_id: &str, level: MofLevel) -> Result<DisplanTemplate, TemplateError> {
        let mut out = self.clone();
        let el = out
            .elements
            .iter_mut()
            .find(|e| e.id == element_id)
            .ok_or_else(|| TemplateError::NotFound(element_id.to_string()))?;
        el.mof = Some(level);
        Ok(out)
    }

    /// Writes the template back in document form; parsing the result gives
    /// an equal template.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        if !self.title.is_empty() {
            out.push_str(&format!("@title {}\n\n", self.title));
        }
        for (i, s) in self.sections.iter().enumerate() {
            out.push_str(&"#".repeat(s.level));
            out.push(' ');
            out.push_str(&s.title);
            if let Some(p) = s.phase {
                out.push_str(&format!(" [phase:{p}]"));
            }
            if !s.models.is_empty() {
                let kinds: Vec<&str> = s.models.iter().map(|k| k.keyword()).collect();
                out.push_str(&format!(" [model:{}]", kinds.join(",")));
            }
            out.push_str("\n\n");
            for e in self.elements.iter().filter(|e| e.section == i) {
                if let Some(m) = e.mof {
                    out.push_str(&format!("[mof:{m}]\n"));
                }
                out.push_str(&e.text);
                out.push_str("\n\n");
            }
        }
        out
    }
}

/// Placeholders found in `text`, left to right.
pub fn extract_placeholders(text: &str) -> Result<Vec<PlaceholderSpan>, markup::MarkupError> {
    markup::extract_placeholders(text)
}

struct Block {
    line: usize,
    lines: Vec<String>,
}

pub fn parse_template(doc: &str) -> Result<DisplanTemplate, TemplateError> {
    for (ln, line) in doc.split('\n').enumerate() {
        for (col, c) in line.chars().enumerate() {
            if c.is_control() && c != '\t' {
                return Err(perr(ln + 1, col + 1, format!("control character U+{:04X}", c as u32)));
            }
        }
    }

    let mut title = String::new();
    let mut sections: Vec<Section> = Vec::new();
    // (section index, effective phase, effective hints) for the open heading chain.
    let mut stack: Vec<(usize, Option<PhaseId>, Vec<AbmKind>)> = Vec::new();
    let mut elements = Vec::new();
    let mut ordinals: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut block: Option<Block> = None;

    let mut flush = |block: &mut Option<Block>,
                     stack: &Vec<(usize, Option<PhaseId>, Vec<AbmKind>)>,
                     sections: &Vec<Section>,
                     elements: &mut Vec<TemplateElement>|
     -> Result<(), TemplateError> {
        let Some(b) = block.take() else { return Ok(()) };
        let Some((section, phase, hints)) = stack.last() else {
            return Err(perr(b.line, 1, "body text before the first heading"));
        };
        let mut lines = b.lines;
        let mut text_line = b.line;
        let mut mof = None;
        if let Some(rest) = lines[0].strip_prefix("[mof:") {
            if let Some((level, tail)) = rest.split_once(']') {
                mof = Some(MofLevel::from_str(level).map_err(|e| perr(b.line, 1, e.to_string()))?);
                let tail = tail.trim().to_string();
                if tail.is_empty() {
                    lines.remove(0);
                    text_line += 1;
                } else {
                    lines[0] = tail;
                }
            }
        }
        if lines.is_empty() {
            return Err(perr(b.line, 1, "MOF mark without element text"));
        }
        let text = lines.join("\n");
        if let Err(e) = markup::extract_placeholders(&text) {
            let (l, c) = locate(&text, e.offset);
            return Err(perr(text_line + l, c + 1, e.message));
        }
        let path = sections[*section].path.clone();
        let ord = ordinals.entry(path.clone()).or_default();
        let ordinal = *ord;
        *ord += 1;
        let mut parts: Vec<&str> = path.iter().map(String::as_str).collect();
        let ord_s = ordinal.to_string();
        parts.push(&ord_s);
        elements.push(TemplateElement {
            id: format!("e{}", short_hash(&parts)),
            section_path: path,
            section: *section,
            phase: *phase,
            text,
            mof,
            hints: hints.clone(),
        });
        Ok(())
    };

    for (idx, raw) in doc.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            flush(&mut block, &stack, &sections, &mut elements)?;
            let level = line.chars().take_while(|&c| c == '#').count();
            let rest = &line[level..];
            if !rest.is_empty() && !rest.starts_with([' ', '\t']) {
                return Err(perr(ln, level + 1, "expected a space after `#`"));
            }
            let (heading, phase, models) = parse_heading(rest.trim(), ln)?;
            while stack.last().is_some_and(|(i, _, _)| sections[*i].level >= level) {
                stack.pop();
            }
            let mut path: Vec<String> = stack.last().map(|(i, _, _)| sections[*i].path.clone()).unwrap_or_default();
            path.push(heading.clone());
            let eff_phase = phase.or_else(|| stack.last().and_then(|(_, p, _)| *p));
            let eff_hints = if models.is_empty() {
                stack.last().map(|(_, _, h)| h.clone()).unwrap_or_default()
            } else {
                models.clone()
            };
            sections.push(Section { level, title: heading, path, phase, models });
            stack.push((sections.len() - 1, eff_phase, eff_hints));
        } else if line.is_empty() {
            flush(&mut block, &stack, &sections, &mut elements)?;
        } else if line.starts_with('@') && sections.is_empty() && block.is_none() {
            let (key, value) = line[1..].split_once(char::is_whitespace).unwrap_or((&line[1..], ""));
            match key {
                "title" => title = value.trim().to_string(),
                other => return Err(perr(ln, 1, format!("unknown directive `@{other}`"))),
            }
        } else {
            match block.as_mut() {
                Some(b) => b.lines.push(line.to_string()),
                None => block = Some(Block { line: ln, lines: vec![line.to_string()] }),
            }
        }
    }
    flush(&mut block, &stack, &sections, &mut elements)?;

    let mut seen = BTreeSet::new();
    for e in &elements {
        if !seen.insert(e.id.as_str()) {
            return Err(perr(0, 0, format!("element id collision `{}`", e.id)));
        }
    }

    let phases_covered = sections.iter().filter_map(|s| s.phase).collect();
    let placeholders = index_placeholders(&elements);
    Ok(DisplanTemplate { title, phases_covered, sections, elements, placeholders })
}

fn parse_heading(mut text: &str, ln: usize) -> Result<(String, Option<PhaseId>, Vec<AbmKind>), TemplateError> {
    let mut phase = None;
    let mut models = Vec::new();
    loop {
        let trimmed = text.trim_end();
        let Some(open) = trimmed.rfind('[') else { break };
        if !trimmed.ends_with(']') {
            break;
        }
        let inner = &trimmed[open + 1..trimmed.len() - 1];
        let Some((key, value)) = inner.split_once(':') else { break };
        match key.trim() {
            "phase" => {
                if phase.is_some() {
                    return Err(perr(ln, open + 1, "phase given twice"));
                }
                phase = Some(PhaseId::from_str(value).map_err(|e| perr(ln, open + 1, e.to_string()))?);
            }
            "model" => {
                if !models.is_empty() {
                    return Err(perr(ln, open + 1, "model hints given twice"));
                }
                for v in value.split(',') {
                    let kind = AbmKind::from_str(v).map_err(|e| perr(ln, open + 1, e.to_string()))?;
                    if !models.contains(&kind) {
                        models.push(kind);
                    }
                }
            }
            _ => break,
        }
        text = &trimmed[..open];
    }
    let title = text.trim().to_string();
    if title.is_empty() {
        return Err(perr(ln, 1, "empty heading"));
    }
    Ok((title, phase, models))
}

/// (line offset, column) of a character offset within multi-line text.
fn locate(text: &str, offset: usize) -> (usize, usize) {
    let mut line = 0;
    let mut col = 0;
    for c in text.chars().take(offset) {
        if c == '\n' {
            line += 1;
            col = 0;
        } else {
            col += 1;
        }
    }
    (line, col)
}

fn index_placeholders(elements: &[TemplateElement]) -> Vec<Placeholder> {
    let mut map: BTreeMap<String, Vec<Occurrence>> = BTreeMap::new();
    for e in elements {
        for span in markup::extract_placeholders(&e.text).expect("validated during parse") {
            map.entry(span.name).or_default().push(Occurrence {
                element: e.id.clone(),
                start: span.start,
                end: span.end,
            });
        }
    }
    map.into_iter()
        .map(|(name, occurrences)| Placeholder { name, occurrences })
        .collect()
}
