use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bsdep-lab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(v: &Value) -> Vec<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn oracle_run_writes_manifest() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("linear.json");
    let o = run(&["oracle", "--config", cfg.to_str().unwrap(), "--seed", "42", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("CHECK oracle_y0 PASS ")), "{text}");
    for line in text.lines().filter(|l| l.starts_with("CHECK ")) {
        let fields: Vec<&str> = line.split(' ').collect();
        assert_eq!(fields.len(), 5, "{line}");
        assert!(fields[2] == "PASS" || fields[2] == "FAIL");
        fields[3].parse::<f64>().unwrap();
        fields[4].parse::<f64>().unwrap();
    }
    let manifest = read_json(&out.path().join("manifest.json"));
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["passed"], true);
    for f in manifest["outputs"].as_array().unwrap() {
        assert!(out.path().join(f.as_str().unwrap()).exists());
    }
    assert_eq!(read_json(&out.path().join("config.json"))["ensemble"]["seed"], 42);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn missing_config_fails() {
    let o = run(&["solve", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.json"), "{}", stderr(&o));
}

#[test]
fn help_per_subcommand() {
    for sub in ["solve", "picard", "minimal", "compare", "oracle", "validate", "infinite", "simulate"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        let text = stdout(&o);
        for flag in ["--config", "--seed", "--out", "--paths"] {
            assert!(text.contains(flag), "{sub} help lacks {flag}");
        }
    }
}

#[test]
fn kind_mismatch_rejected() {
    let cfg = configs().join("linear.json");
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("oracle"), "{}", stderr(&o));
}

#[test]
fn failing_validation_exits_one_with_witness() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("validate_square.json");
    let o = run(&["validate", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("CHECK A2 FAIL"));
    let report = read_json(&out.path().join("validation.json"));
    let a2 = report["reports"].as_array().unwrap().iter().find(|r| r["check"] == "A2").unwrap();
    assert!(a2["witness"]["second"].is_object());
    assert_eq!(read_json(&out.path().join("manifest.json"))["passed"], false);
}

#[test]
fn errored_run_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("picard_h1.json");
    std::fs::write(
        &cfg,
        r#"{
            "experiment": {"kind": "picard"},
            "problem": {
                "terminal": {"kind": "constant", "value": 0.0},
                "generator": {"expr": {"op": "sqrt_abs", "arg": {"op": "y"}}, "class": "H1"},
                "grid": {"steps": 5}
            },
            "ensemble": {"paths": 10}
        }"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["picard", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("picard experiment failed"), "{}", stderr(&o));
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn schema_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"experiment": {"kind": "solve"}, "ensemble": {"paths": 10, "sead": 1}}"#).unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("ensemble") && err.contains("sead"), "{err}");
}

#[test]
fn reruns_are_byte_identical_and_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("girsanov_linear.json");
    let mut hashes = Vec::new();
    for (sub, seed) in [("a", "7"), ("b", "7"), ("c", "8")] {
        let out = dir.path().join(sub);
        let o = run(&["oracle", "--config", cfg.to_str().unwrap(), "--seed", seed, "--paths", "300", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        hashes.push(read_json(&out.join("manifest.json"))["config_hash"].clone());
    }
    let read = |sub: &str, f: &str| std::fs::read(dir.path().join(sub).join(f)).unwrap();
    for f in ["solution.csv", "weights.csv", "summary.json", "config.json"] {
        assert_eq!(read("a", f), read("b", f), "{f}");
    }
    assert_ne!(read("a", "solution.csv"), read("c", "solution.csv"));
    assert_eq!(hashes[0], hashes[1]);
    assert_ne!(hashes[0], hashes[2]);
    let weights = String::from_utf8(read("a", "weights.csv")).unwrap();
    assert_eq!(weights.lines().count(), 301);
}

/// Output schemas: CSV headers and JSON top-level keys.
#[test]
fn output_schemas_match_golden() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("girsanov_linear.json");
    let o = run(&["oracle", "--config", cfg.to_str().unwrap(), "--paths", "50", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let header = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap().lines().next().unwrap().to_string();
    let manifest = read_json(&dir.path().join("manifest.json"));
    let check_keys = keys(&manifest["checks"][0]);
    let summary = read_json(&dir.path().join("summary.json"));
    let text = format!(
        "solution.csv: {}\nweights.csv: {}\nmanifest.json: {}\nmanifest.json checks[]: {}\nsummary.json (oracle): {}\n",
        header("solution.csv"),
        header("weights.csv"),
        keys(&manifest).join(","),
        check_keys.join(","),
        keys(&summary).join(","),
    );
    assert_eq!(text, golden("schemas.txt"));
}
