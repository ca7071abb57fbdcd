//! The seven-facet answer for one goal or task in one phase.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::RepositoryStore;
use crate::abm::{AbmSet, GoalNode};
use crate::axes::PhaseId;
use crate::markup::to_plain;
use crate::pipeline::unit_id;
use crate::text::{jaccard, normalize, token_set};

pub const FACET_NAMES: [&str; 7] = ["goals", "roles", "partners", "purposes", "environment", "triggers", "scenario"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetEntry {
    pub unit: String,
    pub element: String,
    pub label: String,
    pub detail: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeholderView {
    pub plan_id: String,
    pub phase: PhaseId,
    /// The matched goal.
    pub goal: String,
    pub goals: Vec<FacetEntry>,
    pub roles: Vec<FacetEntry>,
    pub partners: Vec<FacetEntry>,
    pub purposes: Vec<FacetEntry>,
    pub environment: Vec<FacetEntry>,
    pub triggers: Vec<FacetEntry>,
    pub scenario: Vec<FacetEntry>,
}

impl StakeholderView {
    /// The facets in presentation order.
    pub fn facets(&self) -> [(&'static str, &[FacetEntry]); 7] {
        [
            (FACET_NAMES[0], &self.goals),
            (FACET_NAMES[1], &self.roles),
            (FACET_NAMES[2], &self.partners),
            (FACET_NAMES[3], &self.purposes),
            (FACET_NAMES[4], &self.environment),
            (FACET_NAMES[5], &self.triggers),
            (FACET_NAMES[6], &self.scenario),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ViewError {
    #[error("no plan `{0}`")]
    UnknownPlan(String),
    #[error("no {phase} goal matches `{query}`; nearest: {}", nearest.join("; "))]
    NoMatchingGoal { query: String, phase: PhaseId, nearest: Vec<String> },
}

impl RepositoryStore {
    pub fn stakeholder_view(&self, plan_id: &str, query: &str, phase: PhaseId) -> Result<StakeholderView, ViewError> {
        let plan = self.plan(plan_id).ok_or_else(|| ViewError::UnknownPlan(plan_id.to_string()))?;
        let set = &plan.set;
        let has_unit = |element: &str| self.unit(&unit_id(element)).is_some();
        let goal = match_goal(set, query, phase, &has_unit).ok_or_else(|| ViewError::NoMatchingGoal {
            query: query.to_string(),
            phase,
            nearest: nearest_goals(set, query, phase),
        })?;

        let entry = |element: &str, label: String, detail: Vec<String>| -> Option<FacetEntry> {
            has_unit(element).then(|| FacetEntry { unit: unit_id(element), element: element.to_string(), label, detail })
        };

        let subtree = set.goal_subtree(&goal.id);
        let mut role_names: Vec<&str> = Vec::new();
        let mut goals = Vec::new();
        for gid in &subtree {
            let Some(g) = set.goal(gid) else { continue };
            for r in &g.roles {
                if !role_names.contains(&r.as_str()) {
                    role_names.push(r);
                }
            }
            let detail = vec![format!("roles: {}", plain_list(&g.roles))];
            goals.extend(entry(&g.id, to_plain(&g.text), detail));
        }
        let involved: BTreeSet<&str> = role_names.iter().copied().collect();

        let roles = role_names
            .iter()
            .filter_map(|name| set.role(name))
            .filter_map(|r| {
                let mut detail: Vec<String> = r.responsibilities.iter().map(|s| to_plain(s)).collect();
                detail.extend(r.constraints.iter().map(|c| format!("constraint: {}", to_plain(c))));
                entry(&r.id, to_plain(&r.name), detail)
            })
            .collect();

        let partners = set
            .organisation
            .iter()
            .filter(|o| o.phase == phase)
            .filter(|o| involved.contains(o.from.as_str()) || involved.contains(o.to.as_str()))
            .filter_map(|o| {
                let label = format!("{} -> {}", to_plain(&o.from), to_plain(&o.to));
                entry(&o.id, label, vec![format!("{}: {}", o.relation, to_plain(&o.channel))])
            })
            .collect();

        let purposes = set
            .interactions
            .iter()
            .filter(|i| i.phase == phase)
            .filter_map(|i| {
                let detail: Vec<String> = i
                    .steps
                    .iter()
                    .filter(|s| {
                        involved.contains(s.initiator.as_str()) || s.responders.iter().any(|r| involved.contains(r.as_str()))
                    })
                    .map(|s| {
                        format!("{}. {} -> {}: {}", s.ordinal, to_plain(&s.initiator), plain_list(&s.responders), to_plain(&s.purpose))
                    })
                    .collect();
                if detail.is_empty() {
                    return None;
                }
                entry(&i.id, to_plain(&i.name), detail)
            })
            .collect();

        let environment = set
            .environment
            .iter()
            .filter(|e| e.phase == phase)
            .filter(|e| e.used_by.iter().any(|r| involved.contains(r.as_str())))
            .filter_map(|e| entry(&e.id, to_plain(&e.name), vec![e.kind.to_string(), format!("used by: {}", plain_list(&e.used_by))]))
            .collect();

        let triggers = set
            .agents
            .iter()
            .filter(|a| a.phase == phase)
            .filter(|a| a.plays.iter().any(|r| involved.contains(r.as_str())))
            .filter_map(|a| entry(&a.id, to_plain(&a.name), a.triggers.iter().map(|t| to_plain(t)).collect()))
            .collect();

        let scenario = set
            .scenarios
            .iter()
            .filter(|s| s.phase == phase && subtree.contains(&s.goal))
            .filter_map(|s| {
                let mut detail = vec![format!("pre: {}", to_plain(&s.pre_condition))];
                for (i, a) in s.activities.iter().enumerate() {
                    detail.push(format!("{}. [{}] {}: {}", i + 1, a.ordering, to_plain(&a.performer), to_plain(&a.name)));
                }
                detail.push(format!("post: {}", to_plain(&s.post_condition)));
                entry(&s.id, to_plain(&s.name), detail)
            })
            .collect();

        Ok(StakeholderView {
            plan_id: plan_id.to_string(),
            phase,
            goal: goal.id.clone(),
            goals,
            roles,
            partners,
            purposes,
            environment,
            triggers,
            scenario,
        })
    }
}

fn plain_list(items: &[String]) -> String {
    items.iter().map(|s| to_plain(s)).collect::<Vec<_>>().join(", ")
}

/// Goals of `phase` with a stored unit whose statement contains the query,
/// ignoring case and spacing; the shortest statement wins, then the id.
fn match_goal<'a>(set: &'a AbmSet, query: &str, phase: PhaseId, has_unit: &dyn Fn(&str) -> bool) -> Option<&'a GoalNode> {
    let q = normalize(query);
    if q.is_empty() {
        return None;
    }
    set.goals
        .iter()
        .filter(|g| g.phase == phase && has_unit(&g.id))
        .filter(|g| normalize(&to_plain(&g.text)).contains(&q))
        .min_by(|a, b| {
            let (ta, tb) = (to_plain(&a.text), to_plain(&b.text));
            ta.chars().count().cmp(&tb.chars().count()).then_with(|| a.id.cmp(&b.id))
        })
}

fn nearest_goals(set: &AbmSet, query: &str, phase: PhaseId) -> Vec<String> {
    let q = token_set(query);
    let mut scored: Vec<(f64, String)> = set
        .goals
        .iter()
        .filter(|g| g.phase == phase)
        .map(|g| {
            let text = to_plain(&g.text);
            (jaccard(&q, &token_set(&text)), text)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    scored.into_iter().take(3).map(|(_, t)| t).collect()
}
