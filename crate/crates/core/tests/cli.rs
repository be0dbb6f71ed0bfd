use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_herzkit"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

#[test]
fn norm_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &["norm"],
        r#"{"function":{"variant":"Gaussian","center":[0.0,0.0],"scale":1.0},"herz":{"alpha":0.0,"p":2,"q":2,"n":2}}"#,
    );
    assert_eq!(code(&o), 0);
    let v = json(d.path(), "norm.json")["value"].as_f64().unwrap();
    assert!((v - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-9);
    let terms = fs::read_to_string(d.path().join("out/terms.csv")).unwrap();
    assert_eq!(terms.lines().next(), Some("k,term"));

    let o = run(
        d.path(),
        &["norm"],
        r#"{"function":{"variant":"RadialPowerLog","n":2,"a":-2.0,"r_hi":1.0},"herz":{"alpha":0.0,"p":1,"q":1,"n":2}}"#,
    );
    assert_eq!(code(&o), 3);
    assert!(json(d.path(), "norm.json")["divergence"]["partial"]["value"].as_f64().unwrap() > 0.0);

    let o = run(
        d.path(),
        &["norm"],
        r#"{"function":{"variant":"Gaussian","center":[0.0],"scale":1.0},"herz":{"alpha":0.0,"q":2,"n":1}}"#,
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`p`"));

    let o = run(
        d.path(),
        &["norm"],
        r#"{"function":{"variant":"Gaussian","center":[0.0],"scale":1.0},"herz":{"alpha":0.0,"p":2,"q":2,"n":1},"typo":true}"#,
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("typo"));
}

#[test]
fn check_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let ok = r#"{"theorem":"Embeddings1","params":{"n":2,"q":2,"r":2,"alpha1":0.0,"alpha2":0.0}}"#;
    assert_eq!(code(&run(d.path(), &["check"], ok)), 0);
    assert_eq!(json(d.path(), "hypotheses.json")["ok"], Value::Bool(true));
    let broken = r#"{"theorem":"Embeddings1","params":{"n":2,"q":2,"r":2,"alpha1":0.3,"alpha2":0.0}}"#;
    assert_eq!(code(&run(d.path(), &["check"], broken)), 1);
    let unknown = r#"{"theorem":"Embeddings7","params":{}}"#;
    assert_eq!(code(&run(d.path(), &["check"], unknown)), 2);
}

#[test]
fn embed_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), &["embed"], r#"{"theorem":"Embeddings2","dilation_levels":[-1,0,1]}"#)), 0);
    let report = json(d.path(), "report.json");
    assert_eq!(report["pass"], Value::Bool(true));
    assert!(report.get("override").is_none());
    let scaling = fs::read_to_string(d.path().join("out/scaling.csv")).unwrap();
    assert_eq!(scaling.lines().next(), Some("index,m,relative_ratio,predicted"));

    let boundary = r#"{"theorem":"Embeddings1","params":{"n":2,"q":2,"r":2,"alpha1":0.1,"alpha2":0.0},"dilation_levels":[0]}"#;
    assert_eq!(code(&run(d.path(), &["embed"], boundary)), 1);
    assert_eq!(code(&run(d.path(), &["embed", "--override-hypotheses"], boundary)), 0);
    assert!(json(d.path(), "report.json").get("override").is_some());

    assert_eq!(code(&run(d.path(), &["embed"], r#"{"theorem":"Embeddings1","family":[]}"#)), 2);

    // a sharp cut-off has no weak gradient: every member fails
    let jumpy = r#"{"theorem":"Embeddings1","family":[{"variant":"RadialPowerLog","n":2,"a":0.0,"r_lo":0.5,"r_hi":1.0}],"dilation_levels":[0,1]}"#;
    assert_eq!(code(&run(d.path(), &["embed"], jumpy)), 4);
}

#[test]
fn run_config_and_flags() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("from-config");
    let rc = format!(
        r#"{{"command":"counterexample","payload":{{"case":"case2","herz":{{"alpha":1.0,"p":2,"q":2,"n":2}},"big_k":8}},"seed":3,"output_dir":{}}}"#,
        serde_json::to_string(out.to_str().unwrap()).unwrap()
    );
    let cfg = d.path().join("run.json");
    fs::write(&cfg, rc).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_herzkit"))
        .args(["run", "--config"])
        .arg(&cfg)
        .env("HERZKIT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("table.csv").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_herzkit")).arg("frobnicate").output().unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_herzkit")).arg("norm").output().unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_herzkit")).args(["check", "--threads", "0", "--config", "x"]).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn operator_and_report_outputs() {
    let d = tempfile::tempdir().unwrap();
    let op = r#"{"function":{"variant":"SmoothBump","center":[0.0],"radius":1.0},"operator":{"kind":"frac_maximal","t":2.0},"points":[[0.0],[0.5]]}"#;
    assert_eq!(code(&run(d.path(), &["operator"], op)), 0);
    let v = json(d.path(), "operator.json");
    assert!((v["points"][0]["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let report = r#"{"theorems":["Embeddings1"],"dilation_levels":[0],"hardy":{"trials":10}}"#;
    let o = run(d.path(), &["report", "--seed", "9"], report);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let hardy = fs::read_to_string(d.path().join("out/hardy.csv")).unwrap();
    assert_eq!(hardy.lines().count(), 1 + 10 * 9 * 4);
    assert!(json(d.path(), "constants.json")["constants"][0]["empirical_constant"].as_f64().unwrap() > 0.0);
}
