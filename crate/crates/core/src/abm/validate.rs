use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{AbmSet, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    DuplicateId,
    /// A role referenced by a goal, interaction, environment, agent or scenario is not declared.
    UnknownRole,
    /// A scenario names a goal id that is not in the goal model.
    UnknownGoal,
    /// An organisation relation endpoint is not a declared role.
    UnknownEndpoint,
    SelfRelation,
    GoalRootMissing,
    MultipleGoalRoots,
    UnknownParent,
    GoalCycle,
    GoalWithoutRole,
    DuplicateRoleName,
    DuplicateEntityName,
    NoResponders,
    TooFewInteractionRoles,
    OrdinalOrder,
    AgentWithoutRole,
    EmptyScenario,
    MissingCondition,
    InterleavedPerformers,
    EmptyText,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::DuplicateId => "duplicate element id",
            Rule::UnknownRole => "role not in role model",
            Rule::UnknownGoal => "scenario goal not in goal model",
            Rule::UnknownEndpoint => "organisation endpoint not in role model",
            Rule::SelfRelation => "organisation relation from a role to itself",
            Rule::GoalRootMissing => "goal model root missing",
            Rule::MultipleGoalRoots => "goal model has more than one root",
            Rule::UnknownParent => "goal parent not in goal model",
            Rule::GoalCycle => "goal hierarchy contains a cycle",
            Rule::GoalWithoutRole => "goal without responsible role",
            Rule::DuplicateRoleName => "role name declared twice",
            Rule::DuplicateEntityName => "environment entity declared twice",
            Rule::NoResponders => "interaction step without responders",
            Rule::TooFewInteractionRoles => "interaction step involves fewer than two roles",
            Rule::OrdinalOrder => "interaction ordinals not strictly increasing",
            Rule::AgentWithoutRole => "agent plays no role",
            Rule::EmptyScenario => "scenario without activities",
            Rule::MissingCondition => "scenario pre- or post-condition missing",
            Rule::InterleavedPerformers => "interleaved activities must alternate between exactly two performers",
            Rule::EmptyText => "required text is empty",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub element: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.rule, self.element, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn of_rule(&self, rule: Rule) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.rule == rule)
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, rule: Rule, element: &str, detail: impl Into<String>) {
        self.0.push(Violation { rule, element: element.to_string(), detail: detail.into() });
    }
}

pub(super) fn validate(set: &AbmSet) -> ConsistencyReport {
    let mut out = Collector(Vec::new());

    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for el in set.elements() {
        *ids.entry(el.id()).or_default() += 1;
    }
    for (id, n) in ids {
        if n > 1 {
            out.push(Rule::DuplicateId, id, format!("used by {n} elements"));
        }
    }

    let mut role_names: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &set.roles {
        *role_names.entry(&r.name).or_default() += 1;
        if r.name.trim().is_empty() {
            out.push(Rule::EmptyText, &r.id, "role name");
        }
    }
    for r in &set.roles {
        if role_names[r.name.as_str()] > 1 {
            out.push(Rule::DuplicateRoleName, &r.id, &r.name);
        }
    }
    let known_role = |name: &str| role_names.contains_key(name);

    // Goal tree.
    let goal_ids: BTreeSet<&str> = set.goals.iter().map(|g| g.id.as_str()).collect();
    let roots: Vec<&str> = set.goals.iter().filter(|g| g.parent.is_none()).map(|g| g.id.as_str()).collect();
    if set.goals.is_empty() || roots.is_empty() {
        out.push(Rule::GoalRootMissing, "", "no goal without a parent");
    } else if roots.len() > 1 {
        for r in &roots[1..] {
            out.push(Rule::MultipleGoalRoots, r, format!("first root is {}", roots[0]));
        }
    }
    let parent_of: BTreeMap<&str, Option<&str>> =
        set.goals.iter().map(|g| (g.id.as_str(), g.parent.as_deref())).collect();
    let mut reported_cycles: BTreeSet<Vec<&str>> = BTreeSet::new();
    for g in &set.goals {
        if let Some(p) = g.parent.as_deref() {
            if !goal_ids.contains(p) {
                out.push(Rule::UnknownParent, &g.id, p);
            }
        }
        if g.text.trim().is_empty() {
            out.push(Rule::EmptyText, &g.id, "goal text");
        }
        if g.roles.is_empty() {
            out.push(Rule::GoalWithoutRole, &g.id, "no responsible role");
        }
        for role in &g.roles {
            if !known_role(role) {
                out.push(Rule::UnknownRole, &g.id, role);
            }
        }
        // Walk up the parent chain; a repeat means g leads into a cycle.
        let mut path: Vec<&str> = vec![g.id.as_str()];
        let mut cur = g.id.as_str();
        while let Some(Some(p)) = parent_of.get(cur) {
            if let Some(pos) = path.iter().position(|x| x == p) {
                let mut cycle: Vec<&str> = path[pos..].to_vec();
                cycle.sort();
                if reported_cycles.insert(cycle.clone()) {
                    out.push(Rule::GoalCycle, cycle[0], cycle.join(" -> "));
                }
                break;
            }
            path.push(p);
            cur = p;
        }
    }

    for rel in &set.organisation {
        for end in [&rel.from, &rel.to] {
            if !known_role(end) {
                out.push(Rule::UnknownEndpoint, &rel.id, end.as_str());
            }
        }
        if rel.from == rel.to {
            out.push(Rule::SelfRelation, &rel.id, &rel.from);
        }
    }

    for it in &set.interactions {
        let mut last: Option<u32> = None;
        for step in &it.steps {
            if let Some(prev) = last {
                if step.ordinal <= prev {
                    out.push(Rule::OrdinalOrder, &it.id, format!("{} after {}", step.ordinal, prev));
                }
            }
            last = Some(step.ordinal);
            if step.responders.is_empty() {
                out.push(Rule::NoResponders, &it.id, format!("step {}", step.ordinal));
            }
            let mut involved: BTreeSet<&str> = step.responders.iter().map(String::as_str).collect();
            involved.insert(&step.initiator);
            if involved.len() < 2 {
                out.push(Rule::TooFewInteractionRoles, &it.id, format!("step {}", step.ordinal));
            }
            for role in std::iter::once(&step.initiator).chain(&step.responders) {
                if !known_role(role) {
                    out.push(Rule::UnknownRole, &it.id, role);
                }
            }
        }
    }

    let mut entity_names: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &set.environment {
        *entity_names.entry(&e.name).or_default() += 1;
    }
    for e in &set.environment {
        if entity_names[e.name.as_str()] > 1 {
            out.push(Rule::DuplicateEntityName, &e.id, &e.name);
        }
        for role in &e.used_by {
            if !known_role(role) {
                out.push(Rule::UnknownRole, &e.id, role);
            }
        }
    }

    for a in &set.agents {
        if a.plays.is_empty() {
            out.push(Rule::AgentWithoutRole, &a.id, &a.name);
        }
        for role in &a.plays {
            if !known_role(role) {
                out.push(Rule::UnknownRole, &a.id, role);
            }
        }
    }

    for s in &set.scenarios {
        if !goal_ids.contains(s.goal.as_str()) {
            out.push(Rule::UnknownGoal, &s.id, &s.goal);
        }
        if s.activities.is_empty() {
            out.push(Rule::EmptyScenario, &s.id, &s.name);
        }
        if s.pre_condition.trim().is_empty() {
            out.push(Rule::MissingCondition, &s.id, "pre-condition");
        }
        if s.post_condition.trim().is_empty() {
            out.push(Rule::MissingCondition, &s.id, "post-condition");
        }
        for a in &s.activities {
            if !known_role(&a.performer) {
                out.push(Rule::UnknownRole, &s.id, &a.performer);
            }
        }
        let mut i = 0;
        while i < s.activities.len() {
            if s.activities[i].ordering != Ordering::Interleaved {
                i += 1;
                continue;
            }
            let start = i;
            while i < s.activities.len() && s.activities[i].ordering == Ordering::Interleaved {
                i += 1;
            }
            let run = &s.activities[start..i];
            let performers: BTreeSet<&str> = run.iter().map(|a| a.performer.as_str()).collect();
            let alternates = run.windows(2).all(|w| w[0].performer != w[1].performer);
            if performers.len() != 2 || !alternates {
                out.push(
                    Rule::InterleavedPerformers,
                    &s.id,
                    format!("activities {}..{}", start + 1, i),
                );
            }
        }
    }

    let mut violations = out.0;
    violations.sort();
    ConsistencyReport { violations }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::axes::{MofLevel, PhaseId};

    fn goal(id: &str, parent: Option<&str>, roles: &[&str]) -> GoalNode {
        GoalNode {
            id: id.into(),
            phase: PhaseId::Response,
            mof: MofLevel::M1,
            text: format!("goal {id}"),
            parent: parent.map(Into::into),
            roles: roles.iter().map(|r| r.to_string()).collect(),
        }
    }

    fn role(id: &str, name: &str) -> RoleSpec {
        RoleSpec {
            id: id.into(),
            phase: PhaseId::Response,
            mof: MofLevel::M1,
            name: name.into(),
            responsibilities: vec![],
            constraints: vec![],
        }
    }

    fn base() -> AbmSet {
        let mut s = AbmSet::new("p", [PhaseId::Response]);
        s.goals = vec![goal("g1", None, &["A"]), goal("g2", Some("g1"), &["A", "B"])];
        s.roles = vec![role("r1", "A"), role("r2", "B")];
        s
    }

    fn rules(s: &AbmSet) -> Vec<Rule> {
        s.validate().violations.into_iter().map(|v| v.rule).collect()
    }

    #[test]
    fn consistent_base() {
        assert!(base().validate().is_empty());
    }

    #[test]
    fn goal_without_role() {
        let mut s = base();
        s.goals[1].roles.clear();
        let r = s.validate();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].rule.to_string(), "goal without responsible role");
        assert_eq!(r.violations[0].element, "g2");
    }

    #[test]
    fn roots_and_cycles() {
        let mut s = base();
        s.goals.push(goal("g3", None, &["A"]));
        assert_eq!(rules(&s), [Rule::MultipleGoalRoots]);

        let mut s = base();
        s.goals.push(goal("g3", Some("g4"), &["A"]));
        s.goals.push(goal("g4", Some("g3"), &["A"]));
        assert_eq!(rules(&s), [Rule::GoalCycle]);

        let mut s = base();
        s.goals[0].parent = Some("g2".into());
        assert_eq!(rules(&s), [Rule::GoalRootMissing, Rule::GoalCycle]);

        let mut s = base();
        s.goals[1].parent = Some("zz".into());
        assert_eq!(rules(&s), [Rule::UnknownParent]);
    }

    #[test]
    fn org_rules() {
        let mut s = base();
        s.organisation.push(OrgRelation {
            id: "o1".into(),
            phase: PhaseId::Response,
            mof: MofLevel::M1,
            from: "A".into(),
            to: "A".into(),
            relation: RelationKind::Control,
            channel: "radio".into(),
        });
        assert_eq!(rules(&s), [Rule::SelfRelation]);
        s.organisation[0].to = "Z".into();
        assert_eq!(rules(&s), [Rule::UnknownEndpoint]);
    }

    #[test]
    fn interaction_rules() {
        let mut s = base();
        s.interactions.push(Interaction {
            id: "i1".into(),
            phase: PhaseId::Response,
            mof: MofLevel::M1,
            name: "x".into(),
            steps: vec![
                InteractionStep { ordinal: 2, initiator: "A".into(), responders: vec!["B".into()], purpose: "p".into() },
                InteractionStep { ordinal: 1, initiator: "A".into(), responders: vec!["A".into()], purpose: "p".into() },
            ],
        });
        assert_eq!(rules(&s), [Rule::TooFewInteractionRoles, Rule::OrdinalOrder]);
    }

    #[test]
    fn scenario_rules() {
        let act = |p: &str, o| ScenarioActivity { name: "a".into(), ordering: o, performer: p.into() };
        let mut s = base();
        s.scenarios.push(ScenarioSpec {
            id: "s1".into(),
            phase: PhaseId::Response,
            mof: MofLevel::M0,
            name: "s".into(),
            goal: "g2".into(),
            pre_condition: "pre".into(),
            activities: vec![
                act("A", Ordering::Sequential),
                act("A", Ordering::Interleaved),
                act("B", Ordering::Interleaved),
                act("A", Ordering::Interleaved),
            ],
            post_condition: "post".into(),
        });
        assert!(s.validate().is_empty());
        s.scenarios[0].activities[3].performer = "B".into();
        assert_eq!(rules(&s), [Rule::InterleavedPerformers]);
        s.scenarios[0].activities.clear();
        s.scenarios[0].goal = "nope".into();
        s.scenarios[0].post_condition.clear();
        assert_eq!(rules(&s), [Rule::UnknownGoal, Rule::EmptyScenario, Rule::MissingCondition]);
    }
}
