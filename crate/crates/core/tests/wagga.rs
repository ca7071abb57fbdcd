use std::collections::{BTreeMap, BTreeSet};

use chrono::{TimeZone, Utc};
use regex::Regex;

use dforge_core::abm::{AbmSet, ElementRef};
use dforge_core::axes::{AbmKind, AgentTag, MofLevel, PhaseId};
use dforge_core::fixtures::{flood_template, wagga_binding, FLOOD_TEMPLATE};
use dforge_core::pipeline::*;
use dforge_core::repository::*;

const COUNCIL: &str = "Wagga Wagga City Council";
const RIS: &str = "Providing Road Information Service (RIS)";

fn at() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap()
}

fn models() -> (AbmSet, AbmSet) {
    let c = customise(&flood_template()).unwrap();
    let inst = instantiate(&c.set, &wagga_binding(), &UnboundPolicy::Strict).unwrap();
    assert!(inst.warnings.is_empty());
    (c.set, inst.set)
}

fn proposed() -> (RepositoryStore, AbmSet) {
    let (template, inst) = models();
    let mut store = RepositoryStore::default();
    store.register_plan(inst.clone(), &template.plan_id).unwrap();
    store.propose("wagga-wagga").unwrap();
    (store, inst)
}

fn loaded() -> RepositoryStore {
    let (mut store, _) = proposed();
    let bulk = store.accept_all_top(None, "planner", at()).unwrap();
    assert!(bulk.skipped.is_empty());
    store.transfer_pending(None).unwrap();
    store
}

fn goal_by_text<'a>(set: &'a AbmSet, text: &str) -> &'a dforge_core::abm::GoalNode {
    set.goals.iter().find(|g| g.text == text).unwrap()
}

#[test]
fn placeholder_occurrences_match_a_regex_scan() {
    let re = Regex::new(r"<([^<>\n]+)>").unwrap();
    let mut expected: BTreeMap<String, usize> = BTreeMap::new();
    for cap in re.captures_iter(FLOOD_TEMPLATE) {
        *expected.entry(cap[1].trim().to_string()).or_default() += 1;
    }
    let t = flood_template();
    let got: BTreeMap<String, usize> =
        t.placeholders().iter().map(|p| (p.name.clone(), p.occurrences.len())).collect();
    assert_eq!(got, expected);
    assert_eq!(got.keys().collect::<Vec<_>>(), ["CouncilName", "SES LN"]);
}

#[test]
fn prose_blocks_are_pruned_and_records_become_elements() {
    let keys = ["goal:", "role:", "relation:", "interaction:", "entity:", "agent:", "scenario:"];
    let (mut prose, mut records) = (0, 0);
    for block in FLOOD_TEMPLATE.split("\n\n") {
        let first = block.lines().find(|l| !l.trim().is_empty() && !l.starts_with("[mof:"));
        match first {
            None => {}
            Some(l) if l.starts_with('#') || l.starts_with('@') => {}
            Some(l) if keys.iter().any(|k| l.starts_with(k)) => records += 1,
            Some(_) => prose += 1,
        }
    }
    let c = customise(&flood_template()).unwrap();
    assert_eq!(c.pruned.len(), prose);
    assert_eq!(prose, 6);
    assert_eq!(c.set.element_count(), records);
    assert!(c.pruned.iter().all(|p| !p.reason.is_empty()));

    let per_kind: Vec<usize> = [
        c.set.goals.len(),
        c.set.roles.len(),
        c.set.organisation.len(),
        c.set.interactions.len(),
        c.set.environment.len(),
        c.set.agents.len(),
        c.set.scenarios.len(),
    ]
    .into();
    assert_eq!(per_kind, [8, 7, 5, 4, 5, 6, 4]);
    assert!(c.set.validate().is_empty());
}

#[test]
fn instantiation_substitutes_every_marker() {
    let (template, inst) = models();
    assert_eq!(inst.plan_id, "wagga-wagga");
    assert_eq!(template.element_count(), inst.element_count());
    for (t, i) in template.elements().zip(inst.elements()) {
        assert_eq!(i.id(), format!("wagga-wagga:{}", t.id()));
        let (tt, it) = (t.texts(), i.texts());
        assert_eq!(tt.len(), it.len());
        for ((tf, tv), (ifld, iv)) in tt.iter().zip(&it) {
            assert_eq!(tf, ifld);
            let expected = tv.replace("<SES LN>", "Wagga Wagga").replace("<CouncilName>", COUNCIL);
            assert_eq!(*iv, expected);
            assert!(!iv.contains('<'));
        }
    }
}

#[test]
fn instance_conforms_and_mutations_are_reported() {
    let (template, inst) = models();
    let report = check_conformance(&inst, &template);
    assert!(report.conforms(), "{:?}", report.findings);
    assert_eq!(report.inferred.get("SES LN").map(String::as_str), Some("Wagga Wagga"));
    assert_eq!(report.inferred.get("CouncilName").map(String::as_str), Some(COUNCIL));

    // A literal change.
    let mut edited = inst.clone();
    edited.roles[0].responsibilities[0] = "Do something else".into();
    let f = check_conformance(&edited, &template).findings;
    assert_eq!(f.len(), 1);
    assert_eq!((f[0].element.as_str(), f[0].kind), (edited.roles[0].id.as_str(), FindingKind::TextMismatch));

    // An element dropped, another invented.
    let mut edited = inst.clone();
    let dropped = edited.environment.remove(0);
    let mut extra = edited.environment[0].clone();
    extra.id = "wagga-wagga:extra".into();
    extra.name = "Sandbag depot".into();
    edited.environment.push(extra);
    let kinds: BTreeSet<(String, FindingKind)> =
        check_conformance(&edited, &template).findings.into_iter().map(|f| (f.element, f.kind)).collect();
    assert!(kinds.contains(&(dropped.id, FindingKind::MissingElement)), "{kinds:?}");
    assert!(kinds.contains(&("wagga-wagga:extra".into(), FindingKind::ExtraElement)), "{kinds:?}");

    // A marker left in place.
    let partial = instantiate(
        &template,
        &Binding::new([("SES LN".to_string(), "Wagga Wagga".to_string())], "Wagga Wagga", "").unwrap(),
        &UnboundPolicy::Allow(["CouncilName".to_string()].into()),
    )
    .unwrap();
    let f = check_conformance(&partial.set, &template).findings;
    assert!(!f.is_empty());
    assert!(f.iter().all(|f| f.kind == FindingKind::UnboundPlaceholder));
}

#[test]
fn strict_instantiation_lists_unbound_markers() {
    let (template, _) = models();
    let b = Binding::new([("SES LN".to_string(), "Wagga Wagga".to_string())], "Wagga Wagga", "").unwrap();
    assert_eq!(instantiate(&template, &b, &UnboundPolicy::Strict), Err(InstantiateError::Unbound(vec!["CouncilName".into()])));
}

#[test]
fn mof_levels_follow_the_model_kind() {
    let (_, inst) = models();
    let count = |kinds: &[AbmKind], level: MofLevel| {
        inst.elements().filter(|e| kinds.contains(&e.kind()) && e.mof() == level).count()
    };
    let behaviour = [AbmKind::ScenarioModel, AbmKind::AgentModel];
    let structure = [AbmKind::GoalModel, AbmKind::RoleModel];
    assert!(count(&behaviour, MofLevel::M0) > count(&behaviour, MofLevel::M1));
    assert!(count(&structure, MofLevel::M1) > count(&structure, MofLevel::M0));
    // The explicit mark on the recovery committee survives.
    assert_eq!(inst.agents.iter().find(|a| a.name == "Recovery Committee").unwrap().mof, MofLevel::M1);
}

#[test]
fn every_candidate_is_phase_and_tag_compatible() {
    let (store, inst) = proposed();
    let catalog = store.catalog();
    for p in store.proposals() {
        let el = inst.element(&p.element.element).unwrap();
        let expected: BTreeSet<&str> = catalog
            .concepts()
            .iter()
            .filter(|c| c.phase == el.phase() && c.tag.is_some_and(|t| el.kind().compatible_tags().contains(&t)))
            .map(|c| c.id.as_str())
            .collect();
        let got: BTreeSet<&str> = p.candidates.iter().map(|c| c.concept.as_str()).collect();
        assert_eq!(got, expected, "{}", p.id);
        assert!(!got.is_empty());
    }
    let ris = goal_by_text(&inst, RIS);
    let p = store.proposal(&proposal_id(&ris.id)).unwrap();
    assert!(p.candidates.iter().all(|c| {
        let concept = catalog.concept(&c.concept).unwrap();
        concept.tag == Some(AgentTag::Goal) && concept.phase == PhaseId::Response
    }));
}

#[test]
fn decisions_are_accounted_for() {
    let (mut store, inst) = proposed();
    let total = store.proposals().count();
    let ids: Vec<String> = store.proposals().map(|p| p.id.clone()).collect();

    let ris = proposal_id(&goal_by_text(&inst, RIS).id);
    assert!(matches!(store.confirm(&ris, Decision::AcceptTop, " ", at()), Err(ConfirmError::EmptyActor)));
    assert!(matches!(
        store.confirm(&ris, Decision::Reject { reason: "".into() }, "planner", at()),
        Err(ConfirmError::MissingReason)
    ));
    let activity = "response/response-activity".to_string();
    assert!(matches!(
        store.confirm(&ris, Decision::Select { concept: activity.clone(), reason: None }, "planner", at()),
        Err(ConfirmError::NotACandidate(_))
    ));
    assert!(matches!(
        store.confirm(
            &ris,
            Decision::Select { concept: "recovery/recovery-goal".into(), reason: Some("wrong phase".into()) },
            "planner",
            at()
        ),
        Err(ConfirmError::IncompatibleConcept { .. })
    ));
    assert!(matches!(store.confirm("p:nope", Decision::AcceptTop, "planner", at()), Err(ConfirmError::UnknownProposal(_))));
    assert!(store.audit().is_empty());

    store.confirm(&ids[0], Decision::Reject { reason: "duplicate".into() }, "planner", at()).unwrap();
    store.confirm(&ids[1], Decision::AcceptTop, "planner", at()).unwrap();
    let second = store.proposal(&ids[2]).unwrap().candidates[1].concept.clone();
    store.confirm(&ids[2], Decision::Select { concept: second, reason: None }, "reviewer", at()).unwrap();
    let outcome = store
        .confirm(&ris, Decision::Select { concept: activity.clone(), reason: Some("treated as a task".into()) }, "reviewer", at())
        .unwrap();
    match outcome {
        Outcome::Unit(u) => assert_eq!(u.cell, CubeAddress { phase: PhaseId::Response, mof: MofLevel::M1, tag: AgentTag::Activity }),
        other => panic!("{other:?}"),
    }
    match store.confirm(&ids[1], Decision::AcceptTop, "someone", at()) {
        Err(ConfirmError::AlreadyDecided { by, status, .. }) => {
            assert_eq!(by, "planner");
            assert_eq!(status, ProposalStatus::Confirmed);
        }
        other => panic!("{other:?}"),
    }

    let status_count = |s: ProposalStatus| store.proposals().filter(|p| p.status == s).count();
    assert_eq!(status_count(ProposalStatus::Rejected), 1);
    assert_eq!(status_count(ProposalStatus::Confirmed), 2);
    assert_eq!(status_count(ProposalStatus::Overridden), 1);
    assert_eq!(status_count(ProposalStatus::Pending), total - 4);
    assert_eq!(store.audit().len(), 4);
    assert_eq!(store.rejections().len(), 1);
    assert_eq!(store.pending_units(None).len(), 3);

    let bulk = store.accept_all_top(Some("wagga-wagga"), "planner", at()).unwrap();
    assert_eq!(bulk.outcomes.len(), total - 4);
    assert_eq!(store.audit().len(), total);
    let seqs: Vec<u64> = store.audit().records().iter().map(|r| r.seq).collect();
    assert_eq!(seqs, (1..=total as u64).collect::<Vec<_>>());
}

#[test]
fn transfer_counts_match_a_group_by() {
    let (mut store, _) = proposed();
    store.accept_all_top(None, "planner", at()).unwrap();
    let pending = store.pending_units(None);
    let mut expected: BTreeMap<CubeAddress, usize> = BTreeMap::new();
    for u in &pending {
        *expected.entry(u.cell).or_default() += 1;
    }
    let receipt = transfer(&pending, &mut store).unwrap();
    let got: BTreeMap<CubeAddress, usize> = receipt.inserted.iter().map(|c| (c.cell, c.count)).collect();
    assert_eq!(got, expected);
    assert_eq!(receipt.total_inserted(), pending.len());
    assert_eq!(receipt.already_present, 0);

    let again = transfer(&pending, &mut store).unwrap();
    assert_eq!((again.total_inserted(), again.already_present), (0, pending.len()));
    assert!(store.pending_units(None).is_empty());

    let mut forged = pending[0].clone();
    forged.confirmed_by = "someone else".into();
    assert!(matches!(transfer(&[forged], &mut store), Err(TransferError::NotAsDecided { .. })));
}

#[test]
fn unconfirmed_units_are_refused() {
    let (mut store, _) = proposed();
    let p = store.proposals().next().unwrap().clone();
    let unit = KnowledgeUnit {
        unit_id: unit_id(&p.element.element),
        cell: CubeAddress { phase: p.phase, mof: p.mof, tag: AgentTag::Goal },
        concept: p.candidates[0].concept.clone(),
        element: p.element.clone(),
        confirmed_by: "x".into(),
        confirmed_at: at(),
    };
    assert!(matches!(transfer(&[unit], &mut store), Err(TransferError::NotConfirmed { .. })));
    assert_eq!(store.unit_count(), 0);
}

#[test]
fn ris_lands_in_the_response_goal_cell() {
    let store = loaded();
    let inst = &store.plan("wagga-wagga").unwrap().set;
    let ris = goal_by_text(inst, RIS);
    let roles: BTreeSet<&str> = ris.roles.iter().map(String::as_str).collect();
    assert_eq!(roles, BTreeSet::from(["Wagga Wagga SESLHQ", COUNCIL, "RTA"]));
    let unit = store.unit(&unit_id(&ris.id)).unwrap();
    assert_eq!(unit.cell, CubeAddress { phase: PhaseId::Response, mof: MofLevel::M1, tag: AgentTag::Goal });
    assert!(store.cell(unit.cell).iter().any(|u| u.unit_id == unit.unit_id));
}

#[test]
fn cells_partition_the_units() {
    let store = loaded();
    let mut seen = BTreeSet::new();
    for addr in CubeAddress::all() {
        for u in store.cell(addr) {
            assert_eq!(u.cell, addr);
            assert!(seen.insert(u.unit_id.clone()));
        }
    }
    assert_eq!(seen.len(), store.unit_count());
    assert_eq!(store.cell_counts().iter().map(|(_, n)| n).sum::<usize>(), store.unit_count());
}

#[test]
fn drilling_filters_and_rolling_up_restores() {
    let store = loaded();
    let view = store.view();
    let response = view.drill_down(AxisValue::Phase(PhaseId::Response)).unwrap();
    let goals = response.drill_down(AxisValue::Tag(AgentTag::Goal)).unwrap();
    let expected: Vec<&str> = {
        let mut v: Vec<&KnowledgeUnit> =
            store.units().filter(|u| u.cell.phase == PhaseId::Response && u.cell.tag == AgentTag::Goal).collect();
        v.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));
        v.into_iter().map(|u| u.unit_id.as_str()).collect()
    };
    assert_eq!(goals.units().map(|u| u.unit_id.as_str()).collect::<Vec<_>>(), expected);
    assert_eq!(goals.free_axes(), [Axis::Mof]);
    assert_eq!(goals.groups().len(), 2);
    assert_eq!(goals.roll_up(Axis::Tag).unwrap(), response);
    assert_eq!(goals.roll_up(Axis::Phase).unwrap(), view.drill_down(AxisValue::Tag(AgentTag::Goal)).unwrap());
    assert_eq!(response.roll_up(Axis::Phase).unwrap(), view);
    assert_eq!(goals.drill_down(AxisValue::Tag(AgentTag::Role)), Err(CubeError::AlreadyFixed(Axis::Tag)));
    assert_eq!(view.roll_up(Axis::Mof), Err(CubeError::AlreadyFree(Axis::Mof)));
}

#[test]
fn stakeholder_view_references_resolve() {
    let store = loaded();
    let v = store.stakeholder_view("wagga-wagga", "road information", PhaseId::Response).unwrap();
    assert_eq!(v.facets().len(), 7);
    assert_eq!(v.facets().map(|(n, _)| n), FACET_NAMES);
    let inst = &store.plan("wagga-wagga").unwrap().set;
    assert_eq!(v.goal, goal_by_text(inst, RIS).id);
    let roles: BTreeSet<&str> = v.roles.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(roles, BTreeSet::from(["Wagga Wagga SESLHQ", COUNCIL, "RTA"]));
    for (name, entries) in v.facets() {
        assert!(!entries.is_empty(), "{name} is empty");
        for e in entries {
            let unit = store.unit(&e.unit).unwrap_or_else(|| panic!("{name}: {} does not resolve", e.unit));
            assert_eq!(unit.element.element, e.element);
            let el = inst.element(&e.element).unwrap();
            if name != "goals" && name != "roles" {
                assert_eq!(el.phase(), PhaseId::Response, "{name}");
            }
            if let ElementRef::Scenario(s) = el {
                assert_eq!(s.goal, v.goal);
            }
        }
    }

    match store.stakeholder_view("wagga-wagga", "sandbagging", PhaseId::Response) {
        Err(ViewError::NoMatchingGoal { nearest, .. }) => assert!(!nearest.is_empty()),
        other => panic!("{other:?}"),
    }
    assert!(matches!(store.stakeholder_view("nowhere", "road", PhaseId::Response), Err(ViewError::UnknownPlan(_))));
    // The goal exists, but only in the response phase.
    assert!(store.stakeholder_view("wagga-wagga", "road information", PhaseId::Recovery).is_err());
}

#[test]
fn export_round_trips_and_rejects_tampering() {
    let store = loaded();
    let doc = store.export();
    let back = RepositoryStore::import(&doc).unwrap();
    assert_eq!(back.export(), doc);

    // Move one unit to a cell whose tag disagrees with its concept.
    let mut lines: Vec<String> = doc.lines().map(str::to_string).collect();
    let i = lines.iter().position(|l| l.contains(r#""record":"unit""#)).unwrap();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[i]).unwrap();
    let tag = rec["cell"]["tag"].as_str().unwrap().to_string();
    rec["cell"]["tag"] = serde_json::Value::from(if tag == "goal" { "role" } else { "goal" });
    lines[i] = rec.to_string();
    let tampered = lines.join("\n") + "\n";
    assert!(matches!(RepositoryStore::import(&tampered), Err(PersistError::Integrity(_))));

    let mut header: serde_json::Value = serde_json::from_str(doc.lines().next().unwrap()).unwrap();
    header["version"] = serde_json::Value::from(2);
    let newer = format!("{header}\n{}", doc.split_once('\n').unwrap().1);
    assert_eq!(RepositoryStore::import(&newer).err(), Some(PersistError::UnsupportedVersion { found: 2 }));

    assert!(matches!(RepositoryStore::import("{\"hello\":1}\n"), Err(PersistError::NotARepository(_))));
    let truncated: String = doc.lines().take(doc.lines().count() - 1).map(|l| format!("{l}\n")).collect();
    assert!(matches!(RepositoryStore::import(&truncated), Err(PersistError::Integrity(_))));
}
