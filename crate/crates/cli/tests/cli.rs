use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output};

use canodual::model::ReportJson;
use tempfile::NamedTempFile;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_canodual")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn temp_json(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_quartic_specialized() {
    let p = fixture("ex2.json");
    let out = run(&["solve", path_str(&p), "--specialize", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let report: ReportJson = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.status, "GLOBAL_MIN");
    assert!((report.critical_pairs[0].sigma[0] - 19.093).abs() < 1e-2);
}

#[test]
fn missing_file_is_an_error() {
    let out = run(&["solve", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_file_is_an_error() {
    let f = temp_json("{\"n\": 1, \"A\": [[1]]");
    let out = run(&["solve", path_str(f.path()), "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let report: ReportJson = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.status, "ERROR");
    assert!(!report.notes.is_empty());
}

#[test]
fn all_critical_points_of_scalar_example() {
    let p = fixture("ex1.json");
    let out = run(&["solve", path_str(&p), "--all-critical", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let report: ReportJson = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.critical_pairs.len(), 3);
}

#[test]
fn json_is_stable_for_a_fixed_seed() {
    let p = fixture("ex1.json");
    let a = run(&["solve", path_str(&p), "--json", "--seed", "7"]);
    let b = run(&["solve", path_str(&p), "--json", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    let report: ReportJson = serde_json::from_str(&stdout(&a)).unwrap();
    let again: ReportJson = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(report, again);
}

#[test]
fn minimax_file_with_beta_override() {
    let p = fixture("ex3.json");
    let out = run(&["solve", path_str(&p), "--beta", "1e4", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let report: ReportJson = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report.critical_pairs[0].primal_value.abs() < 1e-3);
}

#[test]
fn existence_of_quartic_example() {
    let p = fixture("ex2.json");
    let out = run(&["check-existence", path_str(&p)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("verdict: EXISTS"));
}

#[test]
fn existence_rejects_mixed_shape() {
    let f = temp_json(
        r#"{"n": 1, "A": [[1]], "f": [0.5], "lse": [{"Q": [[1]], "d": 0}],
            "quartic": [{"B": [[1]], "c": -1, "alpha": 1}], "beta": 1}"#,
    );
    let out = run(&["check-existence", path_str(f.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn existence_detects_unbounded_minimax() {
    let f = temp_json(r#"{"n": 1, "A": [[-3]], "f": [1], "lse": [{"Q": [[1]], "d": 0}], "quartic": [], "beta": 1}"#);
    let out = run(&["check-existence", path_str(f.path()), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["verdict"], "UNBOUNDED");

    let out = run(&["solve", path_str(f.path()), "--specialize", "--json"]);
    assert_eq!(out.status.code(), Some(2));
    let report: ReportJson = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.status, "UNBOUNDED");
}

#[test]
fn reproduce_examples() {
    for id in ["1", "2", "3"] {
        let out = run(&["reproduce", id]);
        assert_eq!(out.status.code(), Some(0), "example {id}:\n{}", stdout(&out));
        assert!(stdout(&out).contains("max deviation"));
    }
    assert_eq!(run(&["reproduce", "9"]).status.code(), Some(1));
}

#[test]
fn oracle_compare_agrees_on_fixtures() {
    for name in ["ex1.json", "ex3.json"] {
        let p = fixture(name);
        let out = run(&["oracle-compare", path_str(&p), "--resolution", "401"]);
        assert_eq!(out.status.code(), Some(0), "{name}:\n{}", stdout(&out));
    }
}

#[test]
fn oracle_compare_rejects_large_dimension() {
    let eye: Vec<String> = (0..5)
        .map(|i| format!("[{}]", (0..5).map(|j| if i == j { "1" } else { "0" }).collect::<Vec<_>>().join(",")))
        .collect();
    let text = format!(
        r#"{{"n": 5, "A": [{}], "f": [1,0,0,0,0], "lse": [], "quartic": [{{"B": [{}], "c": -1, "alpha": 1}}], "beta": 1}}"#,
        eye.join(","),
        eye.join(",")
    );
    let f = temp_json(&text);
    let out = run(&["oracle-compare", path_str(f.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
