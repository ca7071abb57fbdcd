//! Does an instance conform to its template under some binding?
//!
//! The binding is not an input: it is inferred from the instance. Texts
//! with a single unknown placeholder have at most one solution, so those are
//! solved first and the values agreed by most texts are fixed. The remaining
//! texts are solved together by backtracking. Whatever is left unexplained
//! becomes a finding.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::abm::{AbmSet, ElementRef};
use crate::markup::{self, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    MissingElement,
    UnboundPlaceholder,
    ExtraElement,
    TextMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub element: String,
    pub kind: FindingKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub plan_id: String,
    pub template_id: String,
    /// The binding under which the instance was compared.
    pub inferred: BTreeMap<String, String>,
    pub findings: Vec<Finding>,
}

impl ConformanceReport {
    pub fn conforms(&self) -> bool {
        self.findings.is_empty()
    }
}

// Instance markers are turned into these so that an instance text is a plain
// string and a leftover `<X>` can still be told apart from literal text.
const OPEN: char = '\u{E000}';
const CLOSE: char = '\u{E001}';

fn sentinel(name: &str) -> String {
    format!("{OPEN}{name}{CLOSE}")
}

fn flatten(markup_text: &str) -> String {
    match markup::tokenize(markup_text) {
        Ok(tokens) => tokens
            .into_iter()
            .map(|t| match t {
                Token::Text(s) => s,
                Token::Marker(m) => sentinel(&m),
            })
            .collect(),
        Err(_) => markup_text.to_string(),
    }
}

#[derive(Debug, Clone)]
enum Piece {
    Lit(String),
    Var(String),
}

fn pieces(markup_text: &str) -> Vec<Piece> {
    match markup::tokenize(markup_text) {
        Ok(tokens) => tokens
            .into_iter()
            .map(|t| match t {
                Token::Text(s) => Piece::Lit(s),
                Token::Marker(m) => Piece::Var(m),
            })
            .collect(),
        Err(_) => vec![Piece::Lit(markup_text.to_string())],
    }
}

/// One template text paired with the instance text it must produce.
struct Equation {
    element: String,
    field: String,
    template: Vec<Piece>,
    target: String,
}

impl Equation {
    fn unknowns(&self, known: &BTreeMap<String, String>) -> BTreeSet<String> {
        self.template
            .iter()
            .filter_map(|p| match p {
                Piece::Var(v) if !known.contains_key(v) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }

    fn render(&self, known: &BTreeMap<String, String>) -> String {
        self.template
            .iter()
            .map(|p| match p {
                Piece::Lit(s) => s.clone(),
                Piece::Var(v) => known.get(v).cloned().unwrap_or_else(|| sentinel(v)),
            })
            .collect()
    }

    /// The unique value of the single unknown `var`, if one exists.
    fn solve_single(&self, var: &str, known: &BTreeMap<String, String>) -> Option<String> {
        let target: Vec<char> = self.target.chars().collect();
        let mut fixed = 0usize;
        let mut count = 0usize;
        for p in &self.template {
            match p {
                Piece::Lit(s) => fixed += s.chars().count(),
                Piece::Var(v) if v == var => count += 1,
                Piece::Var(v) => fixed += known.get(v)?.chars().count(),
            }
        }
        if count == 0 || target.len() < fixed || !(target.len() - fixed).is_multiple_of(count) {
            return None;
        }
        let len = (target.len() - fixed) / count;
        if len == 0 {
            return None;
        }
        let mut pos = 0;
        let mut value: Option<String> = None;
        for p in &self.template {
            let piece: String = match p {
                Piece::Lit(s) => s.clone(),
                Piece::Var(v) if v == var => {
                    let got: String = target[pos..pos + len].iter().collect();
                    match &value {
                        Some(prev) if *prev != got => return None,
                        _ => value = Some(got.clone()),
                    }
                    got
                }
                Piece::Var(v) => known[v].clone(),
            };
            let n = piece.chars().count();
            if pos + n > target.len() || target[pos..pos + n].iter().copied().ne(piece.chars()) {
                return None;
            }
            pos += n;
        }
        (pos == target.len()).then_some(value).flatten()
    }
}

/// All extensions of `known` that make `eq` hold, visited lazily; `visit`
/// returns `true` to stop.
fn each_solution(
    eq: &Equation,
    known: &mut BTreeMap<String, String>,
    budget: &mut usize,
    visit: &mut dyn FnMut(&mut BTreeMap<String, String>, &mut usize) -> bool,
) -> bool {
    let target: Vec<char> = eq.target.chars().collect();
    fn go(
        pieces: &[Piece],
        target: &[char],
        pos: usize,
        known: &mut BTreeMap<String, String>,
        budget: &mut usize,
        visit: &mut dyn FnMut(&mut BTreeMap<String, String>, &mut usize) -> bool,
    ) -> bool {
        if *budget == 0 {
            return true;
        }
        *budget -= 1;
        let Some((first, rest)) = pieces.split_first() else {
            return pos == target.len() && visit(known, budget);
        };
        let fixed = match first {
            Piece::Lit(s) => Some(s.clone()),
            Piece::Var(v) => known.get(v).cloned(),
        };
        if let Some(s) = fixed {
            let n = s.chars().count();
            if pos + n <= target.len() && target[pos..pos + n].iter().copied().eq(s.chars()) {
                return go(rest, target, pos + n, known, budget, visit);
            }
            return false;
        }
        let Piece::Var(v) = first else { unreachable!() };
        for end in pos + 1..=target.len() {
            known.insert(v.clone(), target[pos..end].iter().collect());
            if go(rest, target, end, known, budget, visit) {
                known.remove(v);
                return true;
            }
        }
        known.remove(v);
        false
    }
    go(&eq.template, &target, 0, known, budget, visit)
}

/// Solves all `eqs` jointly; returns the first complete assignment found.
fn solve_joint(eqs: &[&Equation], known: &BTreeMap<String, String>, budget: &mut usize) -> Option<BTreeMap<String, String>> {
    fn rec(
        eqs: &[&Equation],
        known: &mut BTreeMap<String, String>,
        budget: &mut usize,
    ) -> Option<BTreeMap<String, String>> {
        let Some((first, rest)) = eqs.split_first() else {
            return Some(known.clone());
        };
        let mut found = None;
        each_solution(first, known, budget, &mut |k, b| {
            found = rec(rest, k, b);
            found.is_some()
        });
        found
    }
    let mut k = known.clone();
    rec(eqs, &mut k, budget)
}

const SEARCH_BUDGET: usize = 200_000;

fn infer(eqs: &[Equation]) -> BTreeMap<String, String> {
    let mut known: BTreeMap<String, String> = BTreeMap::new();
    loop {
        let mut votes: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        for eq in eqs {
            let unknown = eq.unknowns(&known);
            if unknown.len() != 1 {
                continue;
            }
            let var = unknown.into_iter().next().expect("one unknown");
            if let Some(v) = eq.solve_single(&var, &known) {
                *votes.entry(var).or_default().entry(v).or_default() += 1;
            }
        }
        if votes.is_empty() {
            break;
        }
        for (var, counts) in votes {
            let best = counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .expect("non-empty votes");
            known.insert(var, best.0);
        }
    }

    let open: Vec<&Equation> = eqs.iter().filter(|e| !e.unknowns(&known).is_empty()).collect();
    if open.is_empty() {
        return known;
    }
    let mut budget = SEARCH_BUDGET;
    if let Some(all) = solve_joint(&open, &known, &mut budget) {
        return all;
    }
    // No joint solution: take each text's first solution where it fits.
    for eq in open {
        let mut budget = SEARCH_BUDGET;
        if let Some(k) = solve_joint(&[eq], &known, &mut budget) {
            known = k;
        }
    }
    known
}

pub fn check_conformance(instance: &AbmSet, template: &AbmSet) -> ConformanceReport {
    let prefix = format!("{}:", instance.plan_id);
    let mut findings = Vec::new();

    if instance.phases != template.phases {
        findings.push(Finding {
            element: instance.plan_id.clone(),
            kind: FindingKind::TextMismatch,
            detail: format!("phases differ: expected {:?}, found {:?}", template.phases, instance.phases),
        });
    }

    let template_ids: BTreeSet<&str> = template.elements().map(|e| e.id()).collect();
    let mut pairs: Vec<(ElementRef<'_>, ElementRef<'_>)> = Vec::new();
    let mut matched = BTreeSet::new();
    for inst in instance.elements() {
        let tid = inst.id().strip_prefix(&prefix).filter(|t| template_ids.contains(t));
        match tid.and_then(|t| template.element(t)) {
            Some(tmpl) if tmpl.kind() == inst.kind() => {
                matched.insert(tmpl.id());
                pairs.push((tmpl, inst));
            }
            Some(tmpl) => {
                matched.insert(tmpl.id());
                findings.push(Finding {
                    element: inst.id().to_string(),
                    kind: FindingKind::TextMismatch,
                    detail: format!("kind: expected {}, found {}", tmpl.kind(), inst.kind()),
                });
            }
            None => findings.push(Finding {
                element: inst.id().to_string(),
                kind: FindingKind::ExtraElement,
                detail: format!("{} `{}` has no template counterpart", inst.kind(), markup::to_plain(&inst.label())),
            }),
        }
    }
    for tmpl in template.elements() {
        if !matched.contains(tmpl.id()) {
            findings.push(Finding {
                element: format!("{prefix}{}", tmpl.id()),
                kind: FindingKind::MissingElement,
                detail: format!("{} `{}` is missing", tmpl.kind(), markup::to_plain(&tmpl.label())),
            });
        }
    }

    let mut eqs = Vec::new();
    for (tmpl, inst) in &pairs {
        let map = |id: &str| format!("{prefix}{id}");
        let expected = tmpl.structure(&map);
        let found = inst.structure(&|id: &str| id.to_string());
        for (e, f) in expected.iter().zip(&found) {
            if e != f {
                findings.push(Finding {
                    element: inst.id().to_string(),
                    kind: FindingKind::TextMismatch,
                    detail: format!("{}: expected `{}`, found `{}`", e.0, e.1, f.1),
                });
            }
        }
        if expected.len() != found.len() {
            findings.push(Finding {
                element: inst.id().to_string(),
                kind: FindingKind::TextMismatch,
                detail: "structure differs".to_string(),
            });
        }

        let inst_texts: BTreeMap<String, &str> = inst.texts().into_iter().collect();
        for (field, t) in tmpl.texts() {
            if let Some(i) = inst_texts.get(&field) {
                eqs.push(Equation {
                    element: inst.id().to_string(),
                    field,
                    template: pieces(t),
                    target: flatten(i),
                });
            }
        }
    }

    let known = infer(&eqs);
    let mut unbound: BTreeSet<(String, String)> = BTreeSet::new();
    for eq in &eqs {
        for name in extract_sentinels(&eq.target) {
            unbound.insert((eq.element.clone(), name));
        }
        let rendered = eq.render(&known);
        if rendered != eq.target {
            findings.push(Finding {
                element: eq.element.clone(),
                kind: FindingKind::TextMismatch,
                detail: format!("{}: expected `{}`, found `{}`", eq.field, show(&rendered), show(&eq.target)),
            });
        }
    }
    for (element, name) in unbound {
        findings.push(Finding {
            element,
            kind: FindingKind::UnboundPlaceholder,
            detail: format!("placeholder `{name}` is unbound"),
        });
    }
    findings.sort();
    findings.dedup();

    let inferred = known
        .into_iter()
        .filter(|(_, v)| !v.contains([OPEN, CLOSE]))
        .collect();
    ConformanceReport { plan_id: instance.plan_id.clone(), template_id: template.plan_id.clone(), inferred, findings }
}

fn extract_sentinels(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = s;
    while let Some(i) = rest.find(OPEN) {
        let after = &rest[i + OPEN.len_utf8()..];
        match after.find(CLOSE) {
            Some(j) => {
                out.push(after[..j].to_string());
                rest = &after[j + CLOSE.len_utf8()..];
            }
            None => break,
        }
    }
    out
}

fn show(s: &str) -> String {
    s.replace(OPEN, "<").replace(CLOSE, ">")
}
