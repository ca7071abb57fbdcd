use dforge_core::testing::suites;

const CASES: u32 = 256;

#[test]
fn abm_documents_round_trip() {
    suites::abm_xml_round_trip(CASES).unwrap();
}

#[test]
fn catalogs_round_trip() {
    suites::catalog_round_trip(CASES).unwrap();
}

#[test]
fn repository_exports_round_trip() {
    suites::export_round_trip(CASES).unwrap();
}

#[test]
fn instances_conform_to_their_template() {
    suites::instance_conforms(CASES).unwrap();
}

#[test]
fn candidates_match_exhaustive_filter() {
    suites::proposal_soundness(CASES).unwrap();
}

#[test]
fn cube_partition_and_navigation_laws() {
    suites::cube_laws(CASES).unwrap();
}

#[test]
fn generators_reach_interesting_cases() {
    use dforge_core::abm::Ordering;
    use dforge_core::pipeline::ProposalStatus;
    use dforge_core::testing::{instance, store};
    use proptest::strategy::{Strategy, ValueTree};
    use proptest::test_runner::TestRunner;

    let mut runner = TestRunner::deterministic();
    let (mut markers, mut interleaved, mut overridden, mut rejected, mut units) = (0, 0, 0, 0, 0);
    for _ in 0..100 {
        let (t, _, _) = instance().new_tree(&mut runner).unwrap().current();
        markers += t.placeholder_names().unwrap().len();
        interleaved += t.scenarios.iter().flat_map(|s| &s.activities).filter(|a| a.ordering == Ordering::Interleaved).count();
        let s = store().new_tree(&mut runner).unwrap().current();
        overridden += s.proposals().filter(|p| p.status == ProposalStatus::Overridden).count();
        rejected += s.proposals().filter(|p| p.status == ProposalStatus::Rejected).count();
        units += s.unit_count();
    }
    assert!(markers > 100 && interleaved > 20 && overridden > 20 && rejected > 20 && units > 100);
}
