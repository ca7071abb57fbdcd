mod common;

use common::{cli, replay_cli, ACTOR, AT};
use dforge_core::repository::RepositoryStore;

#[test]
fn replay_produces_a_loadable_repository() {
    let dir = tempfile::tempdir().unwrap();
    let doc = replay_cli(dir.path());
    let store = RepositoryStore::import(&doc).unwrap();
    assert_eq!(store.unit_count(), 39);
    let on_disk = std::fs::read_to_string(dir.path().join("repo.jsonl")).unwrap();
    assert_eq!(on_disk, doc);
}

#[test]
fn view_and_query_read_the_repository() {
    let dir = tempfile::tempdir().unwrap();
    replay_cli(dir.path());
    let repo = dir.path().join("repo.jsonl");
    let repo = repo.to_str().unwrap();

    let (code, out, _) = cli(&["--repo", repo, "view", "--plan", "wagga-wagga", "--phase", "response", "--goal", "Road Information"]);
    assert_eq!(code, 0);
    for facet in ["goals:", "roles:", "partners:", "purposes:", "environment:", "triggers:", "scenario:"] {
        assert!(out.lines().any(|l| l == facet), "{facet} missing from\n{out}");
    }
    assert!(out.contains("Providing Road Information Service (RIS)"));

    let (code, out, _) =
        cli(&["--repo", repo, "--format", "json-lines", "query", "--phase", "response", "--tag", "goal"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["total"], 3);
    assert_eq!(doc["free"], serde_json::json!(["mof"]));

    let (code, _, err) = cli(&["--repo", repo, "view", "--plan", "wagga-wagga", "--phase", "response", "--goal", "sandbags"]);
    assert_eq!(code, 1);
    assert!(err.contains("nearest"));
}

#[test]
fn usage_errors_exit_2() {
    let (code, _, err) = cli(&["confirm", "--all-accept-top"]);
    assert_eq!(code, 2);
    assert!(err.contains("--actor"));
    let (code, _, err) = cli(&["parse", "--nope", "x"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"));
    assert_eq!(cli(&["frobnicate"]).0, 2);
    assert_eq!(cli(&["confirm", "--actor", "a", "--proposal", "p:x"]).0, 2);
    assert_eq!(cli(&["confirm", "--actor", "a", "--proposal", "p:x", "--accept-top", "--reject", "no"]).0, 2);
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("customise"));
}

#[test]
fn domain_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    replay_cli(dir.path());
    let repo = dir.path().join("repo.jsonl");
    let repo = repo.to_str().unwrap();
    let (code, _, err) = cli(&["--repo", repo, "confirm", "--actor", ACTOR, "--at", AT, "--proposal", "p:nope", "--accept-top"]);
    assert_eq!(code, 1);
    assert!(err.contains("p:nope"));

    let store = RepositoryStore::import(&std::fs::read_to_string(repo).unwrap()).unwrap();
    let id = store.proposals().next().unwrap().id.clone();
    let (code, _, err) = cli(&["--repo", repo, "confirm", "--actor", "someone", "--proposal", &id, "--reject", "late"]);
    assert_eq!(code, 1);
    assert!(err.contains("already"), "{err}");

    let missing = dir.path().join("missing.abm");
    assert_eq!(cli(&["conform", "--instance", missing.to_str().unwrap(), "--template", missing.to_str().unwrap()]).0, 1);

    let garbage = dir.path().join("garbage.jsonl");
    std::fs::write(&garbage, "{\"record\":\"manifest\",\"format\":\"dforge-repository\",\"version\":9}\n").unwrap();
    let (code, _, err) = cli(&["--repo", repo, "import", garbage.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("version 9"), "{err}");
}

#[test]
fn conform_exits_1_on_findings() {
    let dir = tempfile::tempdir().unwrap();
    replay_cli(dir.path());
    let t = dir.path().join("t.abm");
    let i = dir.path().join("i.abm");
    let edited = std::fs::read_to_string(&i).unwrap().replace("Close and reopen state roads", "Close state roads");
    std::fs::write(&i, edited).unwrap();
    let (code, out, _) = cli(&["--format", "json-lines", "conform", "--instance", i.to_str().unwrap(), "--template", t.to_str().unwrap()]);
    assert_eq!(code, 1);
    let report: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(report["findings"][0]["kind"], "text-mismatch");
}

#[test]
fn single_decisions_and_import() {
    let dir = tempfile::tempdir().unwrap();
    let doc = replay_cli(dir.path());
    let fresh = dir.path().join("fresh.jsonl");
    let fresh = fresh.to_str().unwrap();
    let exported = dir.path().join("export.jsonl");
    std::fs::write(&exported, &doc).unwrap();
    let (code, out, _) = cli(&["--repo", fresh, "import", exported.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(std::fs::read_to_string(fresh).unwrap(), doc);

    // A second plan decided one proposal at a time.
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    std::fs::write(p("other.binding"), "@locality = Gundagai\nSES LN = Gundagai\nCouncilName = Cootamundra-Gundagai Regional Council\n").unwrap();
    assert_eq!(cli(&["instantiate", "--template", &p("t.abm"), "--binding", &p("other.binding"), "-o", &p("g.abm")]).0, 0);
    let (code, out, _) = cli(&["--repo", fresh, "--format", "json-lines", "propose", "--instance", &p("g.abm"), "--template-id", "flood"]);
    assert_eq!(code, 0);
    let first: serde_json::Value = out
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|p| p["candidates"].as_array().unwrap().len() > 1)
        .unwrap();
    let id = first["id"].as_str().unwrap();
    let second = first["candidates"][1]["concept"].as_str().unwrap();
    let (code, out, err) =
        cli(&["--repo", fresh, "--format", "json-lines", "confirm", "--actor", ACTOR, "--at", AT, "--proposal", id, "--select", second]);
    assert_eq!(code, 0, "{err}");
    let outcome: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(outcome["outcome"], "unit");
    assert_eq!(outcome["concept"], second);
    let (code, out, _) = cli(&["--repo", fresh, "--format", "json-lines", "transfer", "--plan", "gundagai"]);
    assert_eq!(code, 0);
    let receipt: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(receipt["inserted"][0]["count"], 1);
    assert_eq!(cli(&["--repo", fresh, "transfer", "--plan", "nowhere"]).0, 1);
}

#[test]
fn parse_lists_template_elements() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.displan");
    std::fs::write(&path, dforge_core::fixtures::FLOOD_TEMPLATE).unwrap();
    let (code, out, _) = cli(&["--format", "json-lines", "parse", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 45);
    let (code, out, _) = cli(&["parse", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("placeholders: CouncilName, SES LN"));
}
