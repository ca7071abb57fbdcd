//! Property suites shared by the unit tests and the acceptance run. Each
//! suite runs `cases` generated cases from a fixed seed and reports the
//! first failure.

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use super::*;
use crate::abm::{parse_abm, serialize_abm};
use crate::pipeline::{check_conformance, propose_mappings};
use crate::repository::{Axis, AxisValue, CubeView};

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// ABM document round trip for template and instance sets.
pub fn abm_xml_round_trip(cases: u32) -> Result<(), String> {
    run(cases, instance(), |(template, _, inst)| {
        for set in [&template, &inst] {
            let doc = serialize_abm(set).map_err(|r| TestCaseError::fail(r.to_string()))?;
            let parsed = parse_abm(&doc).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(parsed.report.is_empty());
            prop_assert_eq!(&parsed.set, set);
            prop_assert_eq!(serialize_abm(&parsed.set).unwrap(), doc);
        }
        Ok(())
    })
}

pub fn catalog_round_trip(cases: u32) -> Result<(), String> {
    run(cases, catalog(), |cat| {
        let doc = cat.to_document();
        let back = DmmCatalog::load(&doc).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&back, &cat);
        prop_assert_eq!(back.to_document(), doc);
        Ok(())
    })
}

pub fn export_round_trip(cases: u32) -> Result<(), String> {
    run(cases, store(), |store| {
        let doc = store.export();
        let back = RepositoryStore::import(&doc).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back.export(), doc);
        prop_assert_eq!(back.unit_count(), store.unit_count());
        prop_assert_eq!(back.cell_counts(), store.cell_counts());
        Ok(())
    })
}

/// An instance made from a template by a binding conforms to it.
pub fn instance_conforms(cases: u32) -> Result<(), String> {
    run(cases, instance(), |(template, _, inst)| {
        let report = check_conformance(&inst, &template);
        prop_assert!(report.conforms(), "{:?}", report.findings);
        Ok(())
    })
}

/// Tags a concept needs for each model kind, written out independently of
/// the library table.
fn oracle_tags(kind: AbmKind) -> BTreeSet<AgentTag> {
    use AgentTag::*;
    match kind {
        AbmKind::GoalModel => [Goal].into(),
        AbmKind::RoleModel => [Role].into(),
        AbmKind::OrganisationModel => [Organisation].into(),
        AbmKind::InteractionModel => [Interaction].into(),
        AbmKind::EnvironmentModel => [EnvironmentEntity].into(),
        AbmKind::AgentModel => [Agent, Event].into(),
        AbmKind::ScenarioModel => [Activity, Event].into(),
    }
}

/// Candidate lists equal an exhaustive filter over every catalog concept
/// and are ranked by score, then id.
pub fn proposal_soundness(cases: u32) -> Result<(), String> {
    let catalog = DmmCatalog::shipped_annotated();
    run(cases, instance(), move |(_, _, inst)| {
        let proposals = propose_mappings(&inst, &catalog).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(proposals.len(), inst.element_count());
        for p in &proposals {
            let allowed = oracle_tags(p.element.kind);
            let expected: BTreeSet<&str> = catalog
                .concepts()
                .iter()
                .filter(|c| c.phase == p.phase && c.tag.is_some_and(|t| allowed.contains(&t)))
                .map(|c| c.id.as_str())
                .collect();
            let got: BTreeSet<&str> = p.candidates.iter().map(|c| c.concept.as_str()).collect();
            prop_assert_eq!(got.len(), p.candidates.len(), "duplicate candidates");
            prop_assert_eq!(&got, &expected);
            for w in p.candidates.windows(2) {
                prop_assert!(
                    w[0].score > w[1].score || (w[0].score == w[1].score && w[0].concept < w[1].concept),
                    "candidates out of order"
                );
            }
            prop_assert!(p.candidates.iter().all(|c| (0.0..=1.0).contains(&c.score)));
        }
        Ok(())
    })
}

fn axis_value() -> impl Strategy<Value = AxisValue> {
    prop_oneof![phase().prop_map(AxisValue::Phase), mof().prop_map(AxisValue::Mof), tag().prop_map(AxisValue::Tag)]
}

fn holds(v: AxisValue, u: &KnowledgeUnit) -> bool {
    match v {
        AxisValue::Phase(p) => u.cell.phase == p,
        AxisValue::Mof(m) => u.cell.mof == m,
        AxisValue::Tag(t) => u.cell.tag == t,
    }
}

/// Every unit sits in exactly one of the 64 cells; drilling filters,
/// rolling up undoes drilling, and drills on different axes commute.
pub fn cube_laws(cases: u32) -> Result<(), String> {
    run(cases, (units(), axis_value(), axis_value()), |(units, a, b)| {
        let cells = CubeAddress::all();
        prop_assert_eq!(cells.len(), 64);
        prop_assert_eq!(cells.iter().collect::<BTreeSet<_>>().len(), 64);
        for u in &units {
            prop_assert_eq!(cells.iter().filter(|c| **c == u.cell).count(), 1);
        }
        let view = CubeView::new(units.clone());
        let grouped: usize = view.groups().iter().map(|g| g.units.len()).sum();
        prop_assert_eq!(grouped, units.len());
        let mut seen = BTreeSet::new();
        for g in view.groups() {
            for u in g.units {
                prop_assert!(seen.insert(u.unit_id.clone()));
                prop_assert_eq!(g.key.phase, Some(u.cell.phase));
                prop_assert_eq!(g.key.mof, Some(u.cell.mof));
                prop_assert_eq!(g.key.tag, Some(u.cell.tag));
            }
        }

        let down = view.drill_down(a).unwrap();
        let expected: Vec<&str> = {
            let mut v: Vec<&KnowledgeUnit> = units.iter().filter(|u| holds(a, u)).collect();
            v.sort_by(|x, y| x.unit_id.cmp(&y.unit_id));
            v.into_iter().map(|u| u.unit_id.as_str()).collect()
        };
        prop_assert_eq!(down.units().map(|u| u.unit_id.as_str()).collect::<Vec<_>>(), expected);
        prop_assert_eq!(down.roll_up(a.axis()).unwrap(), view.clone());
        prop_assert!(down.drill_down(a).is_err());
        prop_assert!(view.roll_up(a.axis()).is_err());
        prop_assert_eq!(down.free_axes().len(), 2);
        prop_assert!(!down.free_axes().contains(&a.axis()));

        if a.axis() != b.axis() {
            let ab = down.drill_down(b).unwrap();
            let ba = view.drill_down(b).unwrap().drill_down(a).unwrap();
            prop_assert_eq!(&ab, &ba);
            prop_assert_eq!(ab.roll_up(b.axis()).unwrap(), down);
            prop_assert!(ab.units().all(|u| holds(a, u) && holds(b, u)));
            let sum: usize = Axis::ALL.iter().filter(|x| **x != a.axis() && **x != b.axis()).count();
            prop_assert_eq!(ab.free_axes().len(), sum);
        }
        Ok(())
    })
}

pub type Suite = fn(u32) -> Result<(), String>;

/// All suites by name, in the order the acceptance run reports them.
pub const SUITES: [(&str, Suite); 6] = [
    ("abm-xml-round-trip", abm_xml_round_trip),
    ("catalog-round-trip", catalog_round_trip),
    ("export-round-trip", export_round_trip),
    ("instance-conforms", instance_conforms),
    ("proposal-soundness", proposal_soundness),
    ("cube-laws", cube_laws),
];
