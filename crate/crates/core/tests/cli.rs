use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qmeas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmeas")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn model_scenario_succeeds_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "m1.json", r#"{"kind": "model1", "params": {"xi_overlap": [0.3, 0.0]}}"#);
    let out = qmeas(&["run", &path]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("m1.report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["pass"], true);
    assert!(dir.path().join("m1.meta.json").exists());
}

#[test]
fn malformed_and_invalid_scenarios_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write(dir.path(), "broken.json", "{\"kind\": \"model1\",\n  \"params\": {\"c\": }\n}");
    let out = qmeas(&["run", &broken]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let unnormalized = write(dir.path(), "bad.json", r#"{"kind": "model1", "params": {"c": [[1, 0], [1, 0]]}}"#);
    assert_eq!(qmeas(&["run", &unnormalized]).status.code(), Some(2));

    let unknown = write(dir.path(), "unknown.json", r#"{"kind": "model3"}"#);
    assert_eq!(qmeas(&["run", &unknown]).status.code(), Some(2));

    let missing = dir.path().join("nope.json");
    assert_eq!(qmeas(&["run", &missing.to_string_lossy()]).status.code(), Some(2));
}

#[test]
fn tolerance_breach_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "m2.json", r#"{"kind": "model2", "tolerances": {"equality": 1e-30}}"#);
    let out = qmeas(&["run", &path]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn batch_output_is_independent_of_execution_mode() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
  "kind": "audit_batch",
  "params": {"seed": 3, "members": [
    {"d_S": 2, "d_A": 3, "n_outcomes": 2, "pointer_kind": "sharp", "family": "haar_generic", "count": 40},
    {"d_S": 2, "d_A": 2, "n_outcomes": 2, "pointer_kind": {"unsharp": 0.5}, "family": "product_unitary", "count": 10}
  ]}
}"#;
    let path = write(dir.path(), "batch.json", body);
    let (par, seq) = (dir.path().join("par"), dir.path().join("seq"));
    let a = qmeas(&["run", &path, "--out", &par.to_string_lossy()]);
    let b = qmeas(&["run", &path, "--out", &seq.to_string_lossy(), "--sequential"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&a.stdout).contains("schemes=50"));
    for name in ["batch.csv", "batch.manifest.csv", "batch.summary.json"] {
        assert_eq!(fs::read(par.join(name)).unwrap(), fs::read(seq.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_override_changes_the_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"kind": "audit_batch", "params": {"seed": 1, "members": [
    {"d_S": 2, "d_A": 2, "n_outcomes": 2, "pointer_kind": "sharp", "family": "haar_generic", "count": 5}]}}"#;
    let path = write(dir.path(), "s.json", body);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    qmeas(&["run", &path, "--out", &a.to_string_lossy()]);
    qmeas(&["run", &path, "--out", &b.to_string_lossy(), "--seed", "2"]);
    assert_ne!(fs::read(a.join("s.csv")).unwrap(), fs::read(b.join("s.csv")).unwrap());
}
