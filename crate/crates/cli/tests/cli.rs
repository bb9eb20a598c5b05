use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rblab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rblab")).args(args).output().unwrap()
}

fn spec(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("specs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p: PathBuf = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn fidelity_prints_the_depolarizing_value() {
    let out = rblab(&["fidelity", "--channel", r#"{"type":"depolarizing","p":0.01}"#]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["fidelity"].as_f64().unwrap() - 0.9925).abs() < 1e-12);
    assert!(v["config_hash"].is_string());
}

#[test]
fn fit_of_synthetic_csv_recovers_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_string_lossy().into_owned();
    let out = rblab(&["fit", "--csv", &spec("synthetic_decay.csv"), "--out", &o]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert!((v["fit"]["alpha"].as_f64().unwrap() - 0.98).abs() < 1e-9);
    let curve = std::fs::read_to_string(dir.path().join("fit_curve.csv")).unwrap();
    assert_eq!(curve.lines().nth(1), Some("m,observed,fitted"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"version": 1, "name": "x", "experiment": {"group": "clifford", "shots": -1}}"#);
    assert_eq!(rblab(&["run", "--spec", &bad]).status.code(), Some(2));
    assert_eq!(rblab(&["run", "--spec", "/no/such/spec.json"]).status.code(), Some(2));
    assert_eq!(rblab(&["run"]).status.code(), Some(2));
    let premise = rblab(&["verify-theorem", "--group", "klein", "--depolarizing", "0.4"]);
    assert_eq!(premise.status.code(), Some(4));
    let ok = rblab(&["verify-theorem", "--group", "z2", "--delta", "0.03", "--m-max", "4"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let non_unitary = write(dir.path(), "u.json", r#"{"matrix": [[[1, 0], [0, 0]], [[0, 0], [2, 0]]]}"#);
    assert_eq!(rblab(&["compile", "--spec", &non_unitary]).status.code(), Some(3));
}

#[test]
fn run_writes_stamped_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(
        dir.path(),
        "s.json",
        r#"{"version": 1, "name": "small", "experiment": {"group": "clifford", "lengths": [1, 2, 4, 8],
            "circuits_per_length": 3, "shots": 100, "noise": {"gates": {"cnot": [{"type": "depolarizing", "p": 0.02}]}},
            "interleaved": {"gate": "cnot"}, "seed": 5}}"#,
    );
    let o = dir.path().join("out");
    let out = rblab(&["run", "--spec", &s, "--out", o.to_str().unwrap(), "--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(o.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().ends_with("seed=9"));
    assert_eq!(lines.next(), Some("m,mean_survival,std_err,n_circuits"));
    assert_eq!(summary.lines().count(), 6);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(o.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 9);
    assert!(report["F"]["mean"].as_f64().unwrap() < 1.0);
}
