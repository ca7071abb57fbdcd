//! Proptest strategies for generated models, bindings, catalogs and stores.

use std::collections::BTreeSet;

use chrono::{DateTime, TimeZone, Utc};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::sample::{select, subsequence};

use crate::abm::*;
use crate::axes::{AbmKind, AgentTag, MofLevel, PhaseId};
use crate::catalog::{DmmCatalog, DmmConcept};
use crate::pipeline::{
    instantiate, Binding, Decision, ElementKey, KnowledgeUnit, UnboundPolicy,
};
use crate::repository::{CubeAddress, RepositoryStore};

pub mod suites;

pub const MARKERS: [&str; 4] = ["SES LN", "CouncilName", "Region", "River"];

const WORDS: [&str; 16] = [
    "flood", "road", "levee", "warning", "council", "river", "rescue", "evacuate", "centre", "bridge", "supply",
    "report", "Wagga", "Gundagai", "Narrandera", "Tumut",
];

pub fn phase() -> impl Strategy<Value = PhaseId> {
    select(PhaseId::ALL.to_vec())
}

pub fn mof() -> impl Strategy<Value = MofLevel> {
    select(MofLevel::ALL.to_vec())
}

pub fn tag() -> impl Strategy<Value = AgentTag> {
    select(AgentTag::ALL.to_vec())
}

pub fn cube_address() -> impl Strategy<Value = CubeAddress> {
    (phase(), mof(), tag()).prop_map(|(phase, mof, tag)| CubeAddress { phase, mof, tag })
}

/// A few words, sometimes with placeholder markers.
pub fn markup_text() -> impl Strategy<Value = String> {
    vec(prop_oneof![4 => select(WORDS.to_vec()).prop_map(str::to_string), 1 => select(MARKERS.to_vec()).prop_map(|m| format!("<{m}>"))], 1..4)
        .prop_map(|parts| parts.join(" "))
}

fn plain_value() -> impl Strategy<Value = String> {
    vec(select(WORDS.to_vec()), 1..3).prop_map(|w| w.join(" "))
}

/// Binds every marker in [`MARKERS`].
pub fn binding() -> impl Strategy<Value = Binding> {
    (vec(plain_value(), MARKERS.len()), select(WORDS.to_vec())).prop_map(|(values, locality)| {
        let entries = MARKERS.iter().map(|m| m.to_string()).zip(values);
        Binding::new(entries, locality, "").expect("generated binding is valid")
    })
}

fn nonempty_subset(n: usize) -> impl Strategy<Value = Vec<usize>> {
    subsequence((0..n).collect::<Vec<_>>(), 1..=n)
}

fn scenario_activities(roles: usize) -> impl Strategy<Value = Vec<(Ordering, usize, String)>> {
    let single = (select(vec![Ordering::Sequential, Ordering::Parallel]), 0..roles, markup_text())
        .prop_map(|(o, r, t)| vec![(o, r, t)]);
    let run = (0..roles, 1..roles, 2usize..5, markup_text(), markup_text()).prop_map(move |(a, d, len, t1, t2)| {
        let b = (a + d) % roles;
        let mut out: Vec<_> = (0..len)
            .map(|i| (Ordering::Interleaved, if i % 2 == 0 { a } else { b }, if i % 2 == 0 { t1.clone() } else { t2.clone() }))
            .collect();
        out.push((Ordering::Sequential, a, t1));
        out
    });
    vec(prop_oneof![3 => single, 1 => run], 1..3).prop_map(|segs| segs.into_iter().flatten().collect())
}

/// A consistent template-level model set with ids `g0`, `r0`, `o0`, ...
pub fn template_set() -> impl Strategy<Value = AbmSet> {
    (2usize..5, 1usize..6).prop_flat_map(|(nroles, ngoals)| {
        let roles = vec((phase(), mof(), markup_text(), vec(markup_text(), 0..3), vec(markup_text(), 0..2)), nroles);
        let goals = vec((phase(), mof(), markup_text(), any::<prop::sample::Index>(), nonempty_subset(nroles)), ngoals);
        let org = vec((phase(), mof(), 0..nroles, 1..nroles, any::<bool>(), markup_text()), 0..4);
        let steps = vec((0..nroles, nonempty_subset(nroles - 1), markup_text()), 1..4);
        let interactions = vec((phase(), mof(), markup_text(), steps), 0..3);
        let kinds = select(vec![EntityKind::Resource, EntityKind::Information, EntityKind::Infrastructure]);
        let env = vec((phase(), mof(), markup_text(), kinds, nonempty_subset(nroles)), 0..3);
        let agents =
            vec((phase(), mof(), markup_text(), nonempty_subset(nroles), vec(markup_text(), 0..3), vec(markup_text(), 0..3)), 0..3);
        let scenarios = vec(
            (phase(), mof(), markup_text(), 0..ngoals, markup_text(), scenario_activities(nroles), markup_text()),
            0..3,
        );
        (roles, goals, org, interactions, env, agents, scenarios).prop_map(
            move |(roles, goals, org, interactions, env, agents, scenarios)| {
                let role_names: Vec<String> =
                    roles.iter().enumerate().map(|(i, (_, _, t, _, _))| format!("{t} Office {i}")).collect();
                let names = |idx: &[usize]| idx.iter().map(|&i| role_names[i].clone()).collect::<Vec<_>>();
                let mut set = AbmSet::new("template", []);
                for (i, (phase, mof, text, parent, rs)) in goals.into_iter().enumerate() {
                    set.goals.push(GoalNode {
                        id: format!("g{i}"),
                        phase,
                        mof,
                        text,
                        parent: (i > 0).then(|| format!("g{}", parent.index(i))),
                        roles: names(&rs),
                    });
                }
                for (i, (phase, mof, _, resp, cons)) in roles.into_iter().enumerate() {
                    set.roles.push(RoleSpec {
                        id: format!("r{i}"),
                        phase,
                        mof,
                        name: role_names[i].clone(),
                        responsibilities: resp,
                        constraints: cons,
                    });
                }
                for (i, (phase, mof, from, d, control, channel)) in org.into_iter().enumerate() {
                    set.organisation.push(OrgRelation {
                        id: format!("o{i}"),
                        phase,
                        mof,
                        from: role_names[from].clone(),
                        to: role_names[(from + d) % nroles].clone(),
                        relation: if control { RelationKind::Control } else { RelationKind::Peer },
                        channel,
                    });
                }
                for (i, (phase, mof, name, steps)) in interactions.into_iter().enumerate() {
                    let steps = steps
                        .into_iter()
                        .enumerate()
                        .map(|(k, (init, others, purpose))| {
                            // indices into the roles other than the initiator
                            let responders = others.iter().map(|&o| role_names[(init + 1 + o) % nroles].clone()).collect();
                            InteractionStep { ordinal: k as u32 + 1, initiator: role_names[init].clone(), responders, purpose }
                        })
                        .collect();
                    set.interactions.push(Interaction { id: format!("i{i}"), phase, mof, name, steps });
                }
                for (i, (phase, mof, name, kind, used)) in env.into_iter().enumerate() {
                    set.environment.push(EnvironmentEntitySpec {
                        id: format!("e{i}"),
                        phase,
                        mof,
                        name: format!("{name} Store {i}"),
                        kind,
                        used_by: names(&used),
                    });
                }
                for (i, (phase, mof, name, plays, activities, triggers)) in agents.into_iter().enumerate() {
                    set.agents.push(AgentSpec { id: format!("a{i}"), phase, mof, name, plays: names(&plays), activities, triggers });
                }
                for (i, (phase, mof, name, goal, pre, acts, post)) in scenarios.into_iter().enumerate() {
                    let activities = acts
                        .into_iter()
                        .map(|(ordering, r, name)| ScenarioActivity { name, ordering, performer: role_names[r].clone() })
                        .collect();
                    set.scenarios.push(ScenarioSpec {
                        id: format!("s{i}"),
                        phase,
                        mof,
                        name,
                        goal: format!("g{goal}"),
                        pre_condition: pre,
                        activities,
                        post_condition: post,
                    });
                }
                set.phases = set.elements().map(|e| e.phase()).collect();
                set
            },
        )
    })
}

/// An instantiated plan: the template, its binding and the instance.
pub fn instance() -> impl Strategy<Value = (AbmSet, Binding, AbmSet)> {
    (template_set(), binding()).prop_map(|(t, b)| {
        let inst = instantiate(&t, &b, &UnboundPolicy::Strict).expect("generated template instantiates").set;
        (t, b, inst)
    })
}

/// What to do with one proposal when building a store.
#[derive(Debug, Clone)]
pub enum Step {
    Leave,
    AcceptTop,
    /// Select the candidate at this index, modulo the candidate count.
    Pick(prop::sample::Index),
    /// Select a same-phase concept outside the candidate list.
    Override(prop::sample::Index),
    Reject,
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        1 => Just(Step::Leave),
        3 => Just(Step::AcceptTop),
        2 => any::<prop::sample::Index>().prop_map(Step::Pick),
        1 => any::<prop::sample::Index>().prop_map(Step::Override),
        1 => Just(Step::Reject),
    ]
}

pub fn timestamp(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_700_000_000 + secs, 0).single().expect("valid timestamp")
}

/// A store with one registered plan, a mix of decisions and some
/// transferred units.
pub fn store() -> impl Strategy<Value = RepositoryStore> {
    (instance(), vec(step(), 64), any::<bool>()).prop_map(|((_, _, inst), steps, transfer)| {
        let mut store = RepositoryStore::default();
        let plan_id = inst.plan_id.clone();
        store.register_plan(inst, "template").expect("generated plan registers");
        let proposals = store.propose(&plan_id).expect("proposals");
        for (k, (p, s)) in proposals.iter().zip(steps.iter().cycle()).enumerate() {
            let at = timestamp(k as i64);
            let decision = match s {
                Step::Leave => continue,
                Step::AcceptTop if !p.candidates.is_empty() => Decision::AcceptTop,
                Step::Pick(i) if !p.candidates.is_empty() => {
                    Decision::Select { concept: p.candidates[i.index(p.candidates.len())].concept.clone(), reason: None }
                }
                Step::Override(i) => {
                    let listed: BTreeSet<&str> = p.candidates.iter().map(|c| c.concept.as_str()).collect();
                    let others: Vec<_> = store
                        .catalog()
                        .concepts()
                        .iter()
                        .filter(|c| c.phase == p.phase && c.tag.is_some() && !listed.contains(c.id.as_str()))
                        .collect();
                    match others.is_empty() {
                        false => Decision::Select {
                            concept: others[i.index(others.len())].id.clone(),
                            reason: Some("closer fit".into()),
                        },
                        true => Decision::Reject { reason: "no fit".into() },
                    }
                }
                _ => Decision::Reject { reason: "not needed".into() },
            };
            store.confirm(&p.id, decision, "tester", at).expect("generated decision is valid");
        }
        if transfer {
            store.transfer_pending(None).expect("transfer");
        }
        store
    })
}

/// Units with arbitrary cells, for exercising cube views.
pub fn units() -> impl Strategy<Value = Vec<KnowledgeUnit>> {
    vec(cube_address(), 0..40).prop_map(|cells| {
        cells
            .into_iter()
            .enumerate()
            .map(|(i, cell)| KnowledgeUnit {
                unit_id: format!("u:{i:03}"),
                cell,
                concept: format!("c{i}"),
                element: ElementKey { plan_id: "p".into(), kind: AbmKind::GoalModel, element: format!("x{i}") },
                confirmed_by: "tester".into(),
                confirmed_at: timestamp(i as i64),
            })
            .collect()
    })
}

fn awkward_text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 \\\\\t\n\r<>é-]{0,16}"
}

/// A catalog of arbitrary, possibly unannotated concepts with awkward text.
pub fn catalog() -> impl Strategy<Value = DmmCatalog> {
    let concept = (awkward_text(), phase(), prop::option::of(tag()), awkward_text());
    ("[a-z0-9 \t\\\\-]{1,12}", any::<bool>(), vec(concept, 0..20)).prop_map(
        |(version, default, concepts)| {
            let concepts = concepts
                .into_iter()
                .enumerate()
                .map(|(i, (name, phase, tag, description))| DmmConcept {
                    id: format!("{phase}/c{i}"),
                    name: format!("{name}{i}"),
                    phase,
                    tag,
                    description,
                })
                .collect();
            DmmCatalog::new(version, default, concepts).expect("names and ids are distinct")
        },
    )
}
