//! The seven agent-based models that capture plan knowledge.
//!
//! Every element carries an id, the phase it was written for and a MOF
//! level. Free-text fields hold placeholder markup (see [`crate::markup`]),
//! so a template-level set keeps its `<...>` markers until instantiated.

mod validate;
mod xml;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::axes::{AbmKind, MofLevel, PhaseId};
use crate::markup;

pub use validate::{ConsistencyReport, Rule, Violation};
pub use xml::{parse_abm, serialize_abm, AbmParseError, ParsedAbm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Control,
    Peer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Resource,
    Information,
    Infrastructure,
}

/// How a scenario activity relates to its neighbours. `Sequential` runs
/// complete in order, `Parallel` runs in any order, and a run of
/// `Interleaved` activities alternates between exactly two performers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    Parallel,
    Sequential,
    Interleaved,
}

macro_rules! keyword_impl {
    ($t:ty, $what:literal, { $($v:path => $kw:literal),+ }) => {
        impl $t {
            pub fn keyword(self) -> &'static str {
                match self { $($v => $kw),+ }
            }
        }
        impl std::str::FromStr for $t {
            type Err = crate::axes::UnknownVariant;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($kw => Ok($v),)+
                    _ => Err(crate::axes::UnknownVariant { what: $what, value: s.to_string() }),
                }
            }
        }
        impl std::fmt::Display for $t {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.keyword())
            }
        }
    };
}

keyword_impl!(RelationKind, "relation", { RelationKind::Control => "control", RelationKind::Peer => "peer" });
keyword_impl!(EntityKind, "entity kind", {
    EntityKind::Resource => "resource",
    EntityKind::Information => "information",
    EntityKind::Infrastructure => "infrastructure"
});
keyword_impl!(Ordering, "ordering", {
    Ordering::Parallel => "parallel",
    Ordering::Sequential => "sequential",
    Ordering::Interleaved => "interleaved"
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalNode {
    pub id: String,
    pub phase: PhaseId,
    pub mof: MofLevel,
    pub text: String,
    /// `None` for the main goal.
    pub parent: Option<String>,
    pub roles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub id: String,
    pub phase: PhaseId,
    pub mof: MofLevel,
    pub name: String,
    pub responsibilities: Vec<String>,
    pub constraints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrgRelation {
    pub id: String,
    pub phase: PhaseId,
    pub mof: MofLevel,
    pub from: String,
    pub to: String,
    pub relation: RelationKind,
    pub channel: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionStep {
    pub ordinal: u32,
    pub initiator: String,
    pub responders: Vec<String>,
    pub purpose: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub id: String,
    pub phase: PhaseId,
    pub mof: MofLevel,
    pub name: String,
    pub steps: Vec<InteractionStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentEntitySpec {
    pub id: String,
    pub phase: PhaseId,
    pub mof: MofLevel,
    pub name: String,
    pub kind: EntityKind,
    pub used_by: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    pub phase: PhaseId,
    pub mof: MofLevel,
    pub name: String,
    pub plays: Vec<String>,
    pub activities: Vec<String>,
    pub triggers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioActivity {
    pub name: String,
    pub ordering: Ordering,
    pub performer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub phase: PhaseId,
    pub mof: MofLevel,
    pub name: String,
    /// Id of the goal this scenario pursues.
    pub goal: String,
    pub pre_condition: String,
    pub activities: Vec<ScenarioActivity>,
    pub post_condition: String,
}

/// One model of each kind for a template or an instantiated plan.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbmSet {
    pub plan_id: String,
    pub phases: BTreeSet<PhaseId>,
    pub goals: Vec<GoalNode>,
    pub roles: Vec<RoleSpec>,
    pub organisation: Vec<OrgRelation>,
    pub interactions: Vec<Interaction>,
    pub environment: Vec<EnvironmentEntitySpec>,
    pub agents: Vec<AgentSpec>,
    pub scenarios: Vec<ScenarioSpec>,
}

/// Borrowed view of any model element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementRef<'a> {
    Goal(&'a GoalNode),
    Role(&'a RoleSpec),
    Relation(&'a OrgRelation),
    Interaction(&'a Interaction),
    Entity(&'a EnvironmentEntitySpec),
    Agent(&'a AgentSpec),
    Scenario(&'a ScenarioSpec),
}

impl<'a> ElementRef<'a> {
    pub fn kind(&self) -> AbmKind {
        match self {
            ElementRef::Goal(_) => AbmKind::GoalModel,
            ElementRef::Role(_) => AbmKind::RoleModel,
            ElementRef::Relation(_) => AbmKind::OrganisationModel,
            ElementRef::Interaction(_) => AbmKind::InteractionModel,
            ElementRef::Entity(_) => AbmKind::EnvironmentModel,
            ElementRef::Agent(_) => AbmKind::AgentModel,
            ElementRef::Scenario(_) => AbmKind::ScenarioModel,
        }
    }

    pub fn id(&self) -> &'a str {
        match self {
            ElementRef::Goal(e) => &e.id,
            ElementRef::Role(e) => &e.id,
            ElementRef::Relation(e) => &e.id,
            ElementRef::Interaction(e) => &e.id,
            ElementRef::Entity(e) => &e.id,
            ElementRef::Agent(e) => &e.id,
            ElementRef::Scenario(e) => &e.id,
        }
    }

    pub fn phase(&self) -> PhaseId {
        match self {
            ElementRef::Goal(e) => e.phase,
            ElementRef::Role(e) => e.phase,
            ElementRef::Relation(e) => e.phase,
            ElementRef::Interaction(e) => e.phase,
            ElementRef::Entity(e) => e.phase,
            ElementRef::Agent(e) => e.phase,
            ElementRef::Scenario(e) => e.phase,
        }
    }

    pub fn mof(&self) -> MofLevel {
        match self {
            ElementRef::Goal(e) => e.mof,
            ElementRef::Role(e) => e.mof,
            ElementRef::Relation(e) => e.mof,
            ElementRef::Interaction(e) => e.mof,
            ElementRef::Entity(e) => e.mof,
            ElementRef::Agent(e) => e.mof,
            ElementRef::Scenario(e) => e.mof,
        }
    }

    /// Short human label (goal statement, role name, ...), as markup.
    pub fn label(&self) -> String {
        match self {
            ElementRef::Goal(e) => e.text.clone(),
            ElementRef::Role(e) => e.name.clone(),
            ElementRef::Relation(e) => format!("{} -> {} ({})", e.from, e.to, e.relation),
            ElementRef::Interaction(e) => e.name.clone(),
            ElementRef::Entity(e) => e.name.clone(),
            ElementRef::Agent(e) => e.name.clone(),
            ElementRef::Scenario(e) => e.name.clone(),
        }
    }

    /// Every free-text field with a stable field path, in a fixed order.
    pub fn texts(&self) -> Vec<(String, &'a str)> {
        let mut out: Vec<(String, &'a str)> = Vec::new();
        let list = |out: &mut Vec<(String, &'a str)>, field: &str, items: &'a [String]| {
            for (i, s) in items.iter().enumerate() {
                out.push((format!("{field}[{i}]"), s.as_str()));
            }
        };
        match *self {
            ElementRef::Goal(e) => {
                out.push(("text".into(), &e.text));
                list(&mut out, "roles", &e.roles);
            }
            ElementRef::Role(e) => {
                out.push(("name".into(), &e.name));
                list(&mut out, "responsibilities", &e.responsibilities);
                list(&mut out, "constraints", &e.constraints);
            }
            ElementRef::Relation(e) => {
                out.push(("from".into(), &e.from));
                out.push(("to".into(), &e.to));
                out.push(("channel".into(), &e.channel));
            }
            ElementRef::Interaction(e) => {
                out.push(("name".into(), &e.name));
                for (i, s) in e.steps.iter().enumerate() {
                    out.push((format!("steps[{i}].initiator"), &s.initiator));
                    list(&mut out, &format!("steps[{i}].responders"), &s.responders);
                    out.push((format!("steps[{i}].purpose"), &s.purpose));
                }
            }
            ElementRef::Entity(e) => {
                out.push(("name".into(), &e.name));
                list(&mut out, "used-by", &e.used_by);
            }
            ElementRef::Agent(e) => {
                out.push(("name".into(), &e.name));
                list(&mut out, "plays", &e.plays);
                list(&mut out, "activities", &e.activities);
                list(&mut out, "triggers", &e.triggers);
            }
            ElementRef::Scenario(e) => {
                out.push(("name".into(), &e.name));
                out.push(("pre".into(), &e.pre_condition));
                for (i, a) in e.activities.iter().enumerate() {
                    out.push((format!("activities[{i}].name"), &a.name));
                    out.push((format!("activities[{i}].performer"), &a.performer));
                }
                out.push(("post".into(), &e.post_condition));
            }
        }
        out
    }

    /// Non-text fields as `(field, value)` pairs. Id references go through
    /// `map_id` so that sets with differently prefixed ids can be compared.
    pub fn structure(&self, map_id: &dyn Fn(&str) -> String) -> Vec<(String, String)> {
        let mut out = vec![
            ("phase".to_string(), self.phase().to_string()),
            ("mof".to_string(), self.mof().to_string()),
        ];
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        match *self {
            ElementRef::Goal(e) => {
                push("parent", e.parent.as_deref().map(map_id).unwrap_or_default());
                push("roles.len", e.roles.len().to_string());
            }
            ElementRef::Role(e) => {
                push("responsibilities.len", e.responsibilities.len().to_string());
                push("constraints.len", e.constraints.len().to_string());
            }
            ElementRef::Relation(e) => push("relation", e.relation.to_string()),
            ElementRef::Interaction(e) => {
                push("steps.len", e.steps.len().to_string());
                for (i, s) in e.steps.iter().enumerate() {
                    push(&format!("steps[{i}].ordinal"), s.ordinal.to_string());
                    push(&format!("steps[{i}].responders.len"), s.responders.len().to_string());
                }
            }
            ElementRef::Entity(e) => {
                push("kind", e.kind.to_string());
                push("used-by.len", e.used_by.len().to_string());
            }
            ElementRef::Agent(e) => {
                push("plays.len", e.plays.len().to_string());
                push("activities.len", e.activities.len().to_string());
                push("triggers.len", e.triggers.len().to_string());
            }
            ElementRef::Scenario(e) => {
                push("goal", map_id(&e.goal));
                push("activities.len", e.activities.len().to_string());
                for (i, a) in e.activities.iter().enumerate() {
                    push(&format!("activities[{i}].ordering"), a.ordering.to_string());
                }
            }
        }
        out
    }

    /// Plain text used for lexical matching against metamodel concepts.
    pub fn matching_text(&self) -> String {
        let texts: Vec<String> = self.texts().into_iter().map(|(_, t)| markup::to_plain(t)).collect();
        texts.join(" ")
    }
}

impl AbmSet {
    pub fn new(plan_id: impl Into<String>, phases: impl IntoIterator<Item = PhaseId>) -> Self {
        AbmSet { plan_id: plan_id.into(), phases: phases.into_iter().collect(), ..Default::default() }
    }

    /// All elements in model-kind order, then document order.
    pub fn elements(&self) -> impl Iterator<Item = ElementRef<'_>> {
        self.goals
            .iter()
            .map(ElementRef::Goal)
            .chain(self.roles.iter().map(ElementRef::Role))
            .chain(self.organisation.iter().map(ElementRef::Relation))
            .chain(self.interactions.iter().map(ElementRef::Interaction))
            .chain(self.environment.iter().map(ElementRef::Entity))
            .chain(self.agents.iter().map(ElementRef::Agent))
            .chain(self.scenarios.iter().map(ElementRef::Scenario))
    }

    pub fn element(&self, id: &str) -> Option<ElementRef<'_>> {
        self.elements().find(|e| e.id() == id)
    }

    pub fn element_count(&self) -> usize {
        self.goals.len()
            + self.roles.len()
            + self.organisation.len()
            + self.interactions.len()
            + self.environment.len()
            + self.agents.len()
            + self.scenarios.len()
    }

    pub fn goal(&self, id: &str) -> Option<&GoalNode> {
        self.goals.iter().find(|g| g.id == id)
    }

    pub fn role(&self, name: &str) -> Option<&RoleSpec> {
        self.roles.iter().find(|r| r.name == name)
    }

    /// Ids of `root` and all its descendants, root first, depth-first in
    /// document order. Cycles are not followed twice.
    pub fn goal_subtree(&self, root: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_string()];
        while let Some(id) = stack.pop() {
            if out.contains(&id) {
                continue;
            }
            let children: Vec<String> = self
                .goals
                .iter()
                .filter(|g| g.parent.as_deref() == Some(id.as_str()))
                .map(|g| g.id.clone())
                .collect();
            out.push(id);
            stack.extend(children.into_iter().rev());
        }
        out
    }

    pub fn validate(&self) -> ConsistencyReport {
        validate::validate(self)
    }

    /// Applies `f` to every free-text field.
    pub fn map_texts<E>(&mut self, mut f: impl FnMut(&str) -> Result<String, E>) -> Result<(), E> {
        let mut apply = |s: &mut String| -> Result<(), E> {
            *s = f(s)?;
            Ok(())
        };
        for e in &mut self.goals {
            apply(&mut e.text)?;
            e.roles.iter_mut().try_for_each(&mut apply)?;
        }
        for e in &mut self.roles {
            apply(&mut e.name)?;
            e.responsibilities.iter_mut().try_for_each(&mut apply)?;
            e.constraints.iter_mut().try_for_each(&mut apply)?;
        }
        for e in &mut self.organisation {
            apply(&mut e.from)?;
            apply(&mut e.to)?;
            apply(&mut e.channel)?;
        }
        for e in &mut self.interactions {
            apply(&mut e.name)?;
            for s in &mut e.steps {
                apply(&mut s.initiator)?;
                s.responders.iter_mut().try_for_each(&mut apply)?;
                apply(&mut s.purpose)?;
            }
        }
        for e in &mut self.environment {
            apply(&mut e.name)?;
            e.used_by.iter_mut().try_for_each(&mut apply)?;
        }
        for e in &mut self.agents {
            apply(&mut e.name)?;
            e.plays.iter_mut().try_for_each(&mut apply)?;
            e.activities.iter_mut().try_for_each(&mut apply)?;
            e.triggers.iter_mut().try_for_each(&mut apply)?;
        }
        for e in &mut self.scenarios {
            apply(&mut e.name)?;
            apply(&mut e.pre_condition)?;
            for a in &mut e.activities {
                apply(&mut a.name)?;
                apply(&mut a.performer)?;
            }
            apply(&mut e.post_condition)?;
        }
        Ok(())
    }

    /// Applies `f` to every element id and every id reference.
    pub fn map_ids(&mut self, f: impl Fn(&str) -> String) {
        for e in &mut self.goals {
            e.id = f(&e.id);
            e.parent = e.parent.as_deref().map(&f);
        }
        for e in &mut self.roles {
            e.id = f(&e.id);
        }
        for e in &mut self.organisation {
            e.id = f(&e.id);
        }
        for e in &mut self.interactions {
            e.id = f(&e.id);
        }
        for e in &mut self.environment {
            e.id = f(&e.id);
        }
        for e in &mut self.agents {
            e.id = f(&e.id);
        }
        for e in &mut self.scenarios {
            e.id = f(&e.id);
            e.goal = f(&e.goal);
        }
    }

    /// Distinct placeholder names across all text fields, sorted.
    pub fn placeholder_names(&self) -> Result<BTreeSet<String>, markup::MarkupError> {
        let mut names = BTreeSet::new();
        for el in self.elements() {
            for (_, t) in el.texts() {
                names.extend(markup::marker_names(t)?);
            }
        }
        Ok(names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> AbmSet {
        let mut s = AbmSet::new("p", [PhaseId::Response]);
        s.goals.push(GoalNode {
            id: "g1".into(),
            phase: PhaseId::Response,
            mof: MofLevel::M1,
            text: "Main".into(),
            parent: None,
            roles: vec!["<X> R".into()],
        });
        s.goals.push(GoalNode {
            id: "g2".into(),
            phase: PhaseId::Response,
            mof: MofLevel::M1,
            text: "Sub".into(),
            parent: Some("g1".into()),
            roles: vec!["<X> R".into()],
        });
        s.roles.push(RoleSpec {
            id: "r1".into(),
            phase: PhaseId::Response,
            mof: MofLevel::M1,
            name: "<X> R".into(),
            responsibilities: vec![],
            constraints: vec![],
        });
        s
    }

    #[test]
    fn subtree_and_lookup() {
        let s = tiny();
        assert_eq!(s.goal_subtree("g1"), ["g1", "g2"]);
        assert_eq!(s.element("r1").unwrap().kind(), AbmKind::RoleModel);
        assert_eq!(s.element_count(), 3);
        assert_eq!(s.placeholder_names().unwrap().into_iter().collect::<Vec<_>>(), ["X"]);
    }

    #[test]
    fn map_ids_rewrites_references() {
        let mut s = tiny();
        s.map_ids(|id| format!("i:{id}"));
        assert_eq!(s.goals[1].parent.as_deref(), Some("i:g1"));
        assert!(s.validate().is_empty());
    }
}
