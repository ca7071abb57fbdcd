//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};

use dforge_core::abm::AbmSet;
use dforge_core::axes::{AbmKind, AgentTag, MofLevel, PhaseId};
use dforge_core::catalog::DmmCatalog;
use dforge_core::fixtures::{flood_template, wagga_binding};
use dforge_core::pipeline::{check_conformance, customise, instantiate, unit_id, UnboundPolicy};
use dforge_core::repository::{CubeAddress, RepositoryStore, FACET_NAMES};
use dforge_core::testing::suites::SUITES;

const RIS: &str = "Providing Road Information Service (RIS)";
const CASES: u32 = 256;

fn expected_roles() -> BTreeSet<&'static str> {
    BTreeSet::from(["Wagga Wagga SESLHQ", "Wagga Wagga City Council", "RTA"])
}

fn replay() -> (AbmSet, AbmSet, RepositoryStore) {
    let c = customise(&flood_template()).unwrap();
    let inst = instantiate(&c.set, &wagga_binding(), &UnboundPolicy::Strict).unwrap();
    assert!(inst.warnings.is_empty());
    let mut store = RepositoryStore::default();
    store.register_plan(inst.set.clone(), &c.set.plan_id).unwrap();
    store.propose("wagga-wagga").unwrap();
    let at = Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap();
    let bulk = store.accept_all_top(None, common::ACTOR, at).unwrap();
    assert!(bulk.skipped.is_empty());
    store.transfer_pending(None).unwrap();
    (c.set, inst.set, store)
}

fn catalog_facts() {
    let catalog = DmmCatalog::shipped_annotated();
    assert_eq!(catalog.len(), 92);
    let counts: Vec<usize> = PhaseId::ALL.iter().map(|p| catalog.phase_count(*p)).collect();
    assert_eq!(counts, [21, 25, 25, 21]);
    let annotations = [
        ("PreparednessGoal", AgentTag::Goal),
        ("PreparednessTask", AgentTag::Role),
        ("PreparednessTeam", AgentTag::Agent),
        ("Training", AgentTag::Activity),
        ("PublicEducation", AgentTag::Activity),
        ("Before-disaster", AgentTag::Event),
        ("Media", AgentTag::EnvironmentEntity),
        ("MutualAidAgreement", AgentTag::EnvironmentEntity),
    ];
    for (name, tag) in annotations {
        let found: Vec<_> = catalog.concepts().iter().filter(|c| c.name == name).collect();
        assert_eq!(found.len(), 1, "{name}");
        assert_eq!(found[0].tag, Some(tag), "{name}");
    }
}

fn wagga_replay() {
    let (template, inst, store) = replay();
    assert!(check_conformance(&inst, &template).conforms());
    let ris = inst.goals.iter().find(|g| g.text == RIS).expect("RIS goal");
    assert_eq!(ris.roles.iter().map(String::as_str).collect::<BTreeSet<_>>(), expected_roles());
    let unit = store.unit(&unit_id(&ris.id)).expect("RIS unit");
    assert_eq!(unit.cell, CubeAddress { phase: PhaseId::Response, mof: MofLevel::M1, tag: AgentTag::Goal });
}

fn mof_distribution() {
    let c = customise(&flood_template()).unwrap();
    let inst = instantiate(&c.set, &wagga_binding(), &UnboundPolicy::Strict).unwrap().set;
    for set in [&c.set, &inst] {
        let count = |kinds: &[AbmKind], level: MofLevel| {
            set.elements().filter(|e| kinds.contains(&e.kind()) && e.mof() == level).count()
        };
        let behaviour = [AbmKind::ScenarioModel, AbmKind::AgentModel];
        let structure = [AbmKind::GoalModel, AbmKind::RoleModel];
        assert!(count(&behaviour, MofLevel::M0) > count(&behaviour, MofLevel::M1));
        assert!(count(&structure, MofLevel::M1) > count(&structure, MofLevel::M0));
    }
}

fn property_suites() {
    let failed: Vec<String> = SUITES
        .iter()
        .filter_map(|(name, suite)| suite(CASES).err().map(|e| format!("{name}: {e}")))
        .collect();
    assert!(failed.is_empty(), "{}", failed.join("\n"));
}

fn stakeholder_view() {
    let (_, inst, store) = replay();
    let v = store.stakeholder_view("wagga-wagga", "Road Information", PhaseId::Response).unwrap();
    assert_eq!(v.facets().map(|(n, _)| n), FACET_NAMES);
    assert_eq!(v.roles.iter().map(|r| r.label.as_str()).collect::<BTreeSet<_>>(), expected_roles());
    for (name, entries) in v.facets() {
        assert!(!entries.is_empty(), "{name} is empty");
        for e in entries {
            let unit = store.unit(&e.unit).unwrap_or_else(|| panic!("{name}: {} does not resolve", e.unit));
            assert_eq!(unit.element.element, e.element);
            assert!(inst.element(&e.element).is_some(), "{name}: {}", e.element);
        }
    }
}

fn interface_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    let from_cli = common::replay_cli(dir.path());
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let from_http = rt.block_on(async {
        let (app, _) = common::app();
        common::replay_http(&app).await
    });
    assert!(!from_cli.is_empty());
    assert!(from_cli == from_http, "exports differ");
}

fn message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() -> ExitCode {
    type Criterion = (&'static str, Option<Duration>, fn());
    let criteria: [Criterion; 6] = [
        ("catalog facts", Some(Duration::from_secs(1)), catalog_facts),
        ("wagga end-to-end replay", Some(Duration::from_secs(5)), wagga_replay),
        ("MOF distribution", Some(Duration::from_secs(1)), mof_distribution),
        ("property suites", Some(Duration::from_secs(60)), property_suites),
        ("stakeholder view contract", Some(Duration::from_secs(1)), stakeholder_view),
        ("interface equivalence", None, interface_equivalence),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).map_err(message);
        let took = start.elapsed();
        let result = match (result, limit) {
            (Ok(()), Some(limit)) if took > limit => Err(format!("took longer than {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(()) => println!("PASS {} {name} ({:.3}s)", i + 1, took.as_secs_f64()),
            Err(why) => {
                failures += 1;
                println!("FAIL {} {name} ({:.3}s): {why}", i + 1, took.as_secs_f64());
            }
        }
    }
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
