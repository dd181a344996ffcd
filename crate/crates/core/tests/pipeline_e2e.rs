//! End-to-end tests driving the compiled `auditor` binary: exit codes,
//! phase-tagged diagnostics, output completeness, and byte-level
//! determinism across runs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace(relative: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(relative)
        .canonicalize()
        .unwrap()
}

/// Smoke config with absolute fixture paths and a relative out dir, written
/// into `dir`. Byte-identical wherever `dir` is, so runs from two homes can
/// be compared.
fn write_config(dir: &Path) -> PathBuf {
    let text = format!(
        r#"{{
  "enterprise_bundle": "{}",
  "ics_bundle": "{}",
  "entities": "{}",
  "datasets": "{}",
  "base_risk": "{}",
  "out_dir": "out",
  "combination": {{ "threshold": "Partial", "max_k": 2 }}
}}
"#,
        workspace("fixtures/bundles/enterprise_small.json").display(),
        workspace("fixtures/bundles/ics_small.json").display(),
        workspace("fixtures/smoke/entities.json").display(),
        workspace("fixtures/smoke/datasets.json").display(),
        workspace("fixtures/smoke/base_risk.json").display(),
    );
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn auditor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_auditor"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_with_config(config: &Path, subcommand: &str) -> Output {
    auditor(&[subcommand, "--config", config.to_str().unwrap()])
}

#[test]
fn run_produces_complete_report_set_and_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let output = run_with_config(&config, "run");
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let out = dir.path().join("out");
    for name in [
        "graph.json",
        "threat_model.json",
        "risk_profiles.json",
        "detectability.json",
        "network_techniques.json",
        "assessments_rules.json",
        "report.json",
        "coverage_matrix.csv",
        "agreement.csv",
        "report.md",
        "charts/coverage_means.svg",
        "charts/coverage_matrix.svg",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("report written to"), "stdout: {stdout}");

    // CSV shape: header + one row per retained technique, first column ids.
    let csv = std::fs::read_to_string(out.join("coverage_matrix.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "attack_id,OT-Testbed,IT-Corpus");
    assert_eq!(lines.len(), 5, "four retained techniques + header");
}

#[test]
fn identical_configs_give_byte_identical_reports() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let config_a = write_config(dir_a.path());
    let config_b = write_config(dir_b.path());
    assert_eq!(
        std::fs::read(&config_a).unwrap(),
        std::fs::read(&config_b).unwrap()
    );
    assert!(run_with_config(&config_a, "run").status.success());
    assert!(run_with_config(&config_b, "run").status.success());
    for name in [
        "report.json",
        "coverage_matrix.csv",
        "agreement.csv",
        "report.md",
    ] {
        let a = std::fs::read(dir_a.path().join("out").join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join("out").join(name)).unwrap();
        assert_eq!(a, b, "{name} diverged between identical runs");
    }
}

#[test]
fn phases_compose_and_report_rerun_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    for phase in ["ingest", "extract", "score", "detect", "assess", "report"] {
        let output = run_with_config(&config, phase);
        assert!(
            output.status.success(),
            "{phase} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let first = std::fs::read(dir.path().join("out/report.json")).unwrap();
    assert!(run_with_config(&config, "report").status.success());
    let second = std::fs::read(dir.path().join("out/report.json")).unwrap();
    assert_eq!(
        first, second,
        "report rerun from persisted artifacts diverged"
    );
}

#[test]
fn missing_bundle_is_a_tagged_ingest_error_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let text = std::fs::read_to_string(&config).unwrap();
    let broken = text.replace("enterprise_small.json", "no_such_bundle.json");
    std::fs::write(&config, broken).unwrap();
    let output = run_with_config(&config, "run");
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("[ingest]"), "stderr: {stderr}");
}

#[test]
fn malformed_bundle_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let bad_bundle = dir.path().join("bad.json");
    std::fs::write(&bad_bundle, "{\"objects\": 7}").unwrap();
    let text = std::fs::read_to_string(&config).unwrap();
    let broken = text.replace(
        workspace("fixtures/bundles/enterprise_small.json")
            .to_str()
            .unwrap(),
        bad_bundle.to_str().unwrap(),
    );
    std::fs::write(&config, broken).unwrap();
    let output = run_with_config(&config, "run");
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("[ingest]"), "stderr: {stderr}");
}

#[test]
fn usage_errors_exit_1() {
    let no_config = auditor(&["run"]);
    assert_eq!(no_config.status.code(), Some(1));
    let unknown = auditor(&["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(1));
    let help = auditor(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&help.stdout);
    for subcommand in [
        "run", "ingest", "extract", "score", "detect", "assess", "report",
    ] {
        assert!(stdout.contains(subcommand), "help lacks {subcommand}");
    }
}

#[test]
fn cli_overrides_change_behavior() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    assert!(run_with_config(&config, "run").status.success());

    // Additive combiner: weighted_risk becomes base + frequency.
    let output = auditor(&[
        "score",
        "--config",
        config.to_str().unwrap(),
        "--risk-combiner",
        "additive",
    ]);
    assert!(output.status.success());
    let profiles: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/risk_profiles.json")).unwrap(),
    )
    .unwrap();
    let top = &profiles[0];
    let expected = top["base_risk"].as_f64().unwrap() + top["frequency_score"].as_f64().unwrap();
    assert!((top["weighted_risk"].as_f64().unwrap() - expected).abs() < 1e-12);

    // Excluding Partial shrinks the assessment scope to Network-only.
    let output = auditor(&[
        "detect",
        "--config",
        config.to_str().unwrap(),
        "--include-partial",
        "false",
    ]);
    assert!(output.status.success());
    let retained: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/network_techniques.json")).unwrap(),
    )
    .unwrap();
    let keys: Vec<&String> = retained.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["T0804", "T1021.002"]);
}
