//! Template to template-level models: route, prune, mark.
//!
//! An element becomes a model element when its text is a record of
//! `key: value` lines whose first key names the kind:
//!
//! ```text
//! goal: Providing Road Information Service (RIS)
//! parent: Coordinate the flood response
//! responsible: <SES LN> SESLHQ
//! interacting: <CouncilName>; RTA
//! ```
//!
//! - goal: `goal`, then `parent`, `responsible`*, `interacting`*
//! - role: `role`, then `responsibility` and `constraint` (both repeatable)
//! - organisation: `relation` (control or peer), then `from`, `to`, `channel`
//! - interaction: `interaction`, then `step: initiator | r1; r2 | purpose` (repeatable)
//! - environment: `entity`, then `kind`, `used-by`*
//! - agent: `agent`, then `plays`*, `activities`*, `triggers`*
//! - scenario: `scenario`, then `goal`, `pre`, `activity: ordering | performer | name`
//!   (repeatable), `post`
//!
//! Starred values are `;`-separated lists. `parent` and a scenario's `goal`
//! refer to another goal by its statement text.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::Serialize;

use crate::abm::*;
use crate::axes::{AbmKind, MofLevel, PhaseId};
use crate::template::{DisplanTemplate, TemplateElement};
use crate::text::slugify;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CustomiseError {
    #[error("no element could be routed to a model")]
    EmptyOutput { pruned: Vec<PrunedElement> },
    #[error("element {element} claims more than one model kind: {}", kinds.iter().map(|k| k.keyword()).collect::<Vec<_>>().join(", "))]
    RoutingConflict { element: String, kinds: Vec<AbmKind> },
    #[error("element {element}, record line {line}: {message}")]
    Record { element: String, line: usize, message: String },
    #[error("element {element} refers to unknown goal `{reference}`")]
    UnresolvedGoal { element: String, reference: String },
    #[error("element {element} refers to goal `{reference}`, which is ambiguous")]
    AmbiguousGoal { element: String, reference: String },
    #[error("element {element} is routed but sits under no phase heading")]
    NoPhase { element: String },
    #[error("customised models are inconsistent: {0}")]
    Inconsistent(ConsistencyReport),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrunedElement {
    pub element: String,
    pub section_path: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MofMark {
    pub element: String,
    pub mof: MofLevel,
    /// `false` when the kind default was applied.
    pub explicit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Customised {
    pub set: AbmSet,
    pub pruned: Vec<PrunedElement>,
    pub marks: Vec<MofMark>,
}

/// Leading key for each model kind.
pub fn record_key(kind: AbmKind) -> &'static str {
    match kind {
        AbmKind::GoalModel => "goal",
        AbmKind::RoleModel => "role",
        AbmKind::OrganisationModel => "relation",
        AbmKind::InteractionModel => "interaction",
        AbmKind::EnvironmentModel => "entity",
        AbmKind::AgentModel => "agent",
        AbmKind::ScenarioModel => "scenario",
    }
}

fn kind_of_key(key: &str) -> Option<AbmKind> {
    AbmKind::ALL.iter().copied().find(|k| record_key(*k) == key)
}

/// Template-level plan id: the slugified title, or `template`.
pub fn template_plan_id(template: &DisplanTemplate) -> String {
    let slug = slugify(template.title());
    if slug.is_empty() {
        "template".to_string()
    } else {
        slug
    }
}

struct Record {
    fields: Vec<(usize, String, String)>,
}

fn parse_record(text: &str) -> Option<Record> {
    let mut fields = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let (key, value) = line.split_once(':')?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_lowercase() || c == '-') {
            return None;
        }
        fields.push((i + 1, key.to_string(), value.trim().to_string()));
    }
    Some(Record { fields })
}

struct Fields<'a> {
    element: &'a str,
    fields: Vec<(usize, String, String)>,
    used: Vec<bool>,
}

impl<'a> Fields<'a> {
    fn new(element: &'a str, record: Record) -> Self {
        let used = vec![false; record.fields.len()];
        Fields { element, fields: record.fields, used }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> CustomiseError {
        CustomiseError::Record { element: self.element.to_string(), line, message: message.into() }
    }

    fn all(&mut self, key: &str) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        for (i, (line, k, v)) in self.fields.iter().enumerate() {
            if k == key {
                self.used[i] = true;
                out.push((*line, v.clone()));
            }
        }
        out
    }

    fn opt(&mut self, key: &str) -> Result<Option<(usize, String)>, CustomiseError> {
        let mut all = self.all(key);
        if all.len() > 1 {
            return Err(self.err(all[1].0, format!("`{key}` given twice")));
        }
        let v = all.pop();
        if let Some((line, value)) = &v {
            if value.is_empty() {
                return Err(self.err(*line, format!("`{key}` is empty")));
            }
        }
        Ok(v)
    }

    fn req(&mut self, key: &str) -> Result<String, CustomiseError> {
        self.opt(key)?
            .map(|(_, v)| v)
            .ok_or_else(|| self.err(0, format!("missing `{key}`")))
    }

    fn list(&mut self, key: &str) -> Result<Vec<String>, CustomiseError> {
        Ok(self.opt(key)?.map(|(_, v)| split_list(&v, ';')).unwrap_or_default())
    }

    fn finish(self) -> Result<(), CustomiseError> {
        for (i, (line, k, _)) in self.fields.iter().enumerate() {
            if !self.used[i] {
                return Err(self.err(*line, format!("unexpected key `{k}`")));
            }
        }
        Ok(())
    }
}

fn split_list(v: &str, sep: char) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for item in v.split(sep).map(str::trim).filter(|s| !s.is_empty()) {
        if !out.iter().any(|x| x == item) {
            out.push(item.to_string());
        }
    }
    out
}

/// An element routed to a kind, before goal references are resolved.
struct Routed<'a> {
    element: &'a TemplateElement,
    kind: AbmKind,
    phase: PhaseId,
    mof: MofLevel,
    fields: Fields<'a>,
}

pub fn customise(template: &DisplanTemplate) -> Result<Customised, CustomiseError> {
    let mut pruned = Vec::new();
    let mut routed = Vec::new();

    for el in template.elements() {
        let record = parse_record(&el.text);
        let record_kind = record
            .as_ref()
            .and_then(|r| r.fields.first())
            .and_then(|(_, k, _)| kind_of_key(k));

        let mut kinds: BTreeSet<AbmKind> = el.hints.iter().copied().collect();
        kinds.extend(record_kind);
        if kinds.len() > 1 {
            return Err(CustomiseError::RoutingConflict { element: el.id.clone(), kinds: kinds.into_iter().collect() });
        }
        let Some(kind) = record_kind else {
            let reason = match kinds.first() {
                Some(k) => format!("no `{}:` record under a {} section", record_key(*k), k.model_element()),
                None => "no model-kind hint or record".to_string(),
            };
            pruned.push(PrunedElement { element: el.id.clone(), section_path: el.section_path.clone(), reason });
            continue;
        };
        let phase = el.phase.ok_or_else(|| CustomiseError::NoPhase { element: el.id.clone() })?;
        let record = record.expect("record kind implies a record");
        routed.push(Routed {
            element: el,
            kind,
            phase,
            mof: el.mof.unwrap_or(kind.default_mof()),
            fields: Fields::new(&el.id, record),
        });
    }

    if routed.is_empty() {
        return Err(CustomiseError::EmptyOutput { pruned });
    }

    // Goal statements are needed to resolve `parent` and scenario `goal` references.
    let goal_texts: Vec<(String, PhaseId, String)> = routed
        .iter()
        .filter(|r| r.kind == AbmKind::GoalModel)
        .filter_map(|r| {
            r.fields
                .fields
                .first()
                .map(|(_, _, v)| (r.element.id.clone(), r.phase, v.clone()))
        })
        .collect();
    let resolve = |element: &str, phase: PhaseId, reference: &str| -> Result<String, CustomiseError> {
        let hits: Vec<&(String, PhaseId, String)> = goal_texts.iter().filter(|(_, _, t)| t == reference).collect();
        let hits = if hits.len() > 1 {
            hits.into_iter().filter(|(_, p, _)| *p == phase).collect()
        } else {
            hits
        };
        match hits.as_slice() {
            [one] => Ok(one.0.clone()),
            [] => Err(CustomiseError::UnresolvedGoal { element: element.to_string(), reference: reference.to_string() }),
            _ => Err(CustomiseError::AmbiguousGoal { element: element.to_string(), reference: reference.to_string() }),
        }
    };

    let mut set = AbmSet::new(template_plan_id(template), template.phases_covered().iter().copied());
    let mut marks = Vec::new();
    for r in routed {
        let Routed { element, kind, phase, mof, mut fields } = r;
        let id = element.id.clone();
        marks.push(MofMark { element: id.clone(), mof, explicit: element.mof.is_some() });
        match kind {
            AbmKind::GoalModel => {
                let text = fields.req("goal")?;
                let parent = match fields.opt("parent")? {
                    Some((_, p)) => Some(resolve(&id, phase, &p)?),
                    None => None,
                };
                let mut roles = fields.list("responsible")?;
                for r in fields.list("interacting")? {
                    if !roles.contains(&r) {
                        roles.push(r);
                    }
                }
                fields.finish()?;
                set.goals.push(GoalNode { id, phase, mof, text, parent, roles });
            }
            AbmKind::RoleModel => {
                let name = fields.req("role")?;
                let responsibilities = fields.all("responsibility").into_iter().map(|(_, v)| v).collect();
                let constraints = fields.all("constraint").into_iter().map(|(_, v)| v).collect();
                fields.finish()?;
                set.roles.push(RoleSpec { id, phase, mof, name, responsibilities, constraints });
            }
            AbmKind::OrganisationModel => {
                let raw = fields.req("relation")?;
                let relation = RelationKind::from_str(&raw).map_err(|e| fields.err(1, e.to_string()))?;
                let from = fields.req("from")?;
                let to = fields.req("to")?;
                let channel = fields.req("channel")?;
                fields.finish()?;
                set.organisation.push(OrgRelation { id, phase, mof, from, to, relation, channel });
            }
            AbmKind::InteractionModel => {
                let name = fields.req("interaction")?;
                let mut steps = Vec::new();
                for (i, (line, raw)) in fields.all("step").into_iter().enumerate() {
                    let step = parse_step(&raw).ok_or_else(|| {
                        fields.err(line, "step must read `initiator | responder; ... | purpose`")
                    })?;
                    steps.push(InteractionStep { ordinal: i as u32 + 1, ..step });
                }
                fields.finish()?;
                set.interactions.push(Interaction { id, phase, mof, name, steps });
            }
            AbmKind::EnvironmentModel => {
                let name = fields.req("entity")?;
                let raw = fields.req("kind")?;
                let kind = EntityKind::from_str(&raw).map_err(|e| fields.err(0, e.to_string()))?;
                let used_by = fields.list("used-by")?;
                fields.finish()?;
                set.environment.push(EnvironmentEntitySpec { id, phase, mof, name, kind, used_by });
            }
            AbmKind::AgentModel => {
                let name = fields.req("agent")?;
                let plays = fields.list("plays")?;
                let activities = fields.list("activities")?;
                let triggers = fields.list("triggers")?;
                fields.finish()?;
                set.agents.push(AgentSpec { id, phase, mof, name, plays, activities, triggers });
            }
            AbmKind::ScenarioModel => {
                let name = fields.req("scenario")?;
                let goal_ref = fields.req("goal")?;
                let goal = resolve(&id, phase, &goal_ref)?;
                let pre_condition = fields.req("pre")?;
                let mut activities = Vec::new();
                for (line, raw) in fields.all("activity") {
                    let parts: Vec<&str> = raw.splitn(3, '|').map(str::trim).collect();
                    let [ordering, performer, name] = parts[..] else {
                        return Err(fields.err(line, "activity must read `ordering | performer | name`"));
                    };
                    let ordering = Ordering::from_str(ordering).map_err(|e| fields.err(line, e.to_string()))?;
                    activities.push(ScenarioActivity {
                        name: name.to_string(),
                        ordering,
                        performer: performer.to_string(),
                    });
                }
                let post_condition = fields.req("post")?;
                fields.finish()?;
                set.scenarios.push(ScenarioSpec { id, phase, mof, name, goal, pre_condition, activities, post_condition });
            }
        }
    }

    let report = set.validate();
    if !report.is_empty() {
        return Err(CustomiseError::Inconsistent(report));
    }
    Ok(Customised { set, pruned, marks })
}

fn parse_step(raw: &str) -> Option<InteractionStep> {
    let (initiator, rest) = raw.split_once('|')?;
    let (responders, purpose) = rest.split_once('|')?;
    let initiator = initiator.trim();
    let purpose = purpose.trim();
    let responders = split_list(responders, ';');
    if initiator.is_empty() || purpose.is_empty() || responders.is_empty() {
        return None;
    }
    Some(InteractionStep {
        ordinal: 0,
        initiator: initiator.to_string(),
        responders,
        purpose: purpose.to_string(),
    })
}
