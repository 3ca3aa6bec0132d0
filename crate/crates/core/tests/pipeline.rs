//! End-to-end runs of the stage pipeline: bundled scenarios, determinism of
//! the written tables, and refusal of missing or altered upstream outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use diffract::checks::Status;
use diffract::pipeline::{apply_overrides, Pipeline, Stage, Summary};
use diffract::scenario::Scenario;
use diffract::Error;

const SCENARIOS: [(&str, &str); 5] = [
    ("parabola", include_str!("../scenarios/parabola.toml")),
    ("semilinear", include_str!("../scenarios/semilinear.toml")),
    ("expflat", include_str!("../scenarios/expflat.toml")),
    ("isopower2", include_str!("../scenarios/isopower2.toml")),
    ("f4", include_str!("../scenarios/f4.toml")),
];

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("diffract-pipeline-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn scenario(name: &str) -> Scenario {
    let text = SCENARIOS.iter().find(|(n, _)| *n == name).expect("bundled scenario").1;
    Scenario::parse(text).unwrap()
}

fn tables(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "jsonl"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn bundled_scenarios_parse_and_round_trip() {
    for (name, text) in SCENARIOS {
        let sc = Scenario::parse(text).unwrap();
        assert_eq!(sc.name, name);
        assert_eq!(Scenario::parse(&sc.to_toml()).unwrap(), sc);
        assert!((sc.theta().norm() - 1.0).abs() < 1e-15);
    }
}

#[test]
fn parabola_pipeline_passes_and_reruns_identically() {
    let first = scratch("first");
    let outcomes = Pipeline::new(scenario("parabola"), Some(first.clone())).run_all().unwrap();
    assert_eq!(outcomes.len(), Stage::ALL.len());
    for o in &outcomes {
        for v in &o.verdicts {
            assert_ne!(v.status, Status::Fail, "{v}");
        }
    }
    let verify = Summary::read(&first, Stage::Verify).unwrap();
    assert!(verify.passed());
    let report = std::fs::read_to_string(first.join("report.md")).unwrap();
    assert!(report.contains("verify"));

    let second = scratch("second");
    Pipeline::new(scenario("parabola"), Some(second.clone())).run_all().unwrap();
    let (a, b) = (tables(&first), tables(&second));
    assert!(a.contains_key("mu_sweep.csv") && a.contains_key("residual.jsonl"));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        assert!(bytes == &b[name], "{name} differs between runs");
    }
    std::fs::remove_dir_all(&first).unwrap();
    std::fs::remove_dir_all(&second).unwrap();
}

#[test]
fn missing_upstream_stage_is_named() {
    let dir = scratch("missing");
    match Pipeline::new(scenario("parabola"), Some(dir.clone())).run(Stage::Trace) {
        Err(Error::MissingDependency(what)) => assert!(what.starts_with("classify"), "{what}"),
        other => panic!("expected a missing dependency, got {other:?}"),
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn altered_outputs_and_changed_inputs_are_refused() {
    let dir = scratch("altered");
    let p = Pipeline::new(scenario("parabola"), Some(dir.clone()));
    p.run(Stage::Classify).unwrap();
    p.run(Stage::Trace).unwrap();

    let mut changed = scenario("parabola");
    apply_overrides(&mut changed, Some(99), None, None).unwrap();
    let other = Pipeline::new(changed, Some(dir.clone()));
    assert!(matches!(other.run(Stage::Flowmap), Err(Error::ManifestMismatch(_))));

    let path = dir.join("classify.jsonl");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.push(b'\n');
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(p.run(Stage::Trace), Err(Error::ManifestMismatch(_))));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn non_planar_scenario_skips_the_profile_stages() {
    let dir = scratch("isopower");
    let outcomes = Pipeline::new(scenario("isopower2"), Some(dir.clone())).run_all().unwrap();
    let profiles = outcomes.iter().find(|o| o.stage == Stage::Profiles).unwrap();
    assert!(profiles.verdicts.iter().all(|v| v.status == Status::Skipped));
    assert!(outcomes.iter().all(|o| o.passed()));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn overrides_are_validated() {
    let mut sc = scenario("parabola");
    assert!(matches!(apply_overrides(&mut sc, None, Some(vec![0.05, 0.1]), None), Err(Error::Usage(_))));
    assert!(matches!(apply_overrides(&mut sc, None, None, Some(vec![])), Err(Error::Usage(_))));
    apply_overrides(&mut sc, Some(3), Some(vec![0.1, 0.05]), Some(vec![0.1])).unwrap();
    assert_eq!(sc.seed, 3);
    assert_eq!(sc.asymptotics.eps, vec![0.1, 0.05]);
}
