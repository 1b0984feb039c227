//! End-to-end checks of the `coop-anneal` binary: exit codes, artifact sets
//! and reproducibility of written files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coop_anneal::cli::run_artifact_names;
use coop_anneal::config::ExperimentConfig;
use coop_anneal::game::{EvChargingGame, EvRanges};
use coop_anneal::oracle::multistart_descent;

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coop-anneal")).args(args).output().unwrap()
}

/// Copy of a preset with selected top-level fields replaced.
fn preset_with(dir: &Path, name: &str, edits: &[(&str, serde_json::Value)]) -> PathBuf {
    let text = fs::read_to_string(presets().join(format!("{name}.json"))).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    for (k, v) in edits {
        let mut slot = &mut value;
        for part in k.split('.') {
            slot = &mut slot[part];
        }
        *slot = v.clone();
    }
    let path = dir.join(format!("{name}-edited.json"));
    fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names
}

#[test]
fn presets_parse_and_round_trip() {
    for entry in fs::read_dir(presets()).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() == "ev-oracle.json" {
            continue;
        }
        let config = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(ExperimentConfig::from_json(&config.to_json()).unwrap(), config);
    }
}

#[test]
fn run_emits_documented_artifacts_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let config = preset_with(tmp.path(), "example1-daa", &[("horizon", 2000.into())]);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = bin(&["run", "--config", s(&config), "--out", s(out), "--svg"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let names = listing(&a);
    let fp = names[0].split('-').nth(1).unwrap().to_string();
    let mut expected = run_artifact_names(&fp, true);
    expected.sort();
    assert_eq!(names, expected);
    assert_eq!(listing(&b), names);
    for name in &names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(a.join(format!("run-{fp}-meta.json"))).unwrap()).unwrap();
    assert_eq!(meta["summary"]["fingerprint"], fp.as_str());
    assert_eq!(meta["config"]["horizon"], 2000);
}

#[test]
fn seed_flag_changes_the_fingerprint() {
    let tmp = tempfile::tempdir().unwrap();
    let config = preset_with(tmp.path(), "example1-daa", &[("horizon", 100.into())]);
    let out = tmp.path().join("o");
    assert!(bin(&["run", "--config", s(&config), "--out", s(&out)]).status.success());
    assert!(bin(&["run", "--config", s(&config), "--out", s(&out), "--seed", "99"]).status.success());
    assert_eq!(listing(&out).len(), 2 * run_artifact_names("x", false).len());
}

#[test]
fn malformed_config_exits_one_with_field() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = preset_with(tmp.path(), "example1-daa", &[("schedule.tau_beta", 0.7.into())]);
    let o = bin(&["run", "--config", s(&bad), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau_beta"));

    let unknown = tmp.path().join("unknown.json");
    fs::write(&unknown, r#"{"game":{"kind":"quadratic"},"bogus":1}"#).unwrap();
    let o = bin(&["run", "--config", s(&unknown)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let missing = bin(&["run", "--config", s(&tmp.path().join("nope.json"))]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn divergence_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let wild = preset_with(
        tmp.path(),
        "double-well",
        &[("schedule.c_alpha", 50.0.into()), ("init_box", serde_json::json!([3.0, 3.0]))],
    );
    let o = bin(&["run", "--config", s(&wild), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unwritable_output_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let config = preset_with(tmp.path(), "example1-daa", &[("horizon", 10.into())]);
    let o = bin(&["run", "--config", s(&config), "--out", s(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn check_passes_on_ev_and_fails_without_edges() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["check", "--config", s(&presets().join("ev-daa.json")), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let empty = preset_with(tmp.path(), "ev-daa", &[("network.p_range", serde_json::json!([0.0, 0.0]))]);
    let o = bin(&["check", "--config", s(&empty), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL connectivity"));
}

#[test]
fn compare_same_method_has_zero_difference() {
    let tmp = tempfile::tempdir().unwrap();
    let config = preset_with(
        tmp.path(),
        "example1-daag",
        &[("horizon", 500.into()), ("compare_with", "daag".into())],
    );
    let o = bin(&["compare", "--config", s(&config), "--out", s(tmp.path())]);
    assert!(o.status.success());
    let report = listing(tmp.path()).into_iter().find(|n| n.starts_with("compare-") && n.ends_with(".json")).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join(report)).unwrap()).unwrap();
    assert_eq!(v["report"]["difference"], 0.0);
}

#[test]
fn compare_requires_second_method() {
    let tmp = tempfile::tempdir().unwrap();
    let config = preset_with(tmp.path(), "double-well", &[]);
    let o = bin(&["compare", "--config", s(&config), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_closed_forms_and_dimension_guard() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["oracle", "--config", s(&presets().join("example1-daa.json")), "--out", s(tmp.path())]);
    assert!(o.status.success());
    let file = listing(tmp.path()).pop().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join(file)).unwrap()).unwrap();
    let point: Vec<f64> = serde_json::from_value(v["result"]["point"].clone()).unwrap();
    assert!((point[0] - 1.0 / 3.0).abs() <= 0.01 && (point[1] - 4.0 / 3.0).abs() <= 0.01);
    assert!((v["result"]["value"].as_f64().unwrap() - 75.0 / 9.0).abs() <= 1e-3);
    assert_eq!(v["nash"], serde_json::json!([0.75, 1.75]));

    let o = bin(&["oracle", "--config", s(&presets().join("ev-daa.json")), "--out", s(tmp.path()), "--method", "grid"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("multistart"));
}

#[test]
fn stored_ev_reference_is_reproduced() {
    let stored: serde_json::Value = serde_json::from_slice(&fs::read(presets().join("ev-oracle.json")).unwrap()).unwrap();
    let game = EvChargingGame::from_seed(1, EvRanges::default()).unwrap();
    let fresh = multistart_descent(&game, (0.0, 24.0), 200, 5000, 0).unwrap();
    assert_eq!(stored["result"]["value"].as_f64().unwrap(), fresh.value);
}

#[test]
fn ensemble_reports_basin_fraction() {
    let tmp = tempfile::tempdir().unwrap();
    let config = preset_with(tmp.path(), "example1-daag", &[("horizon", 2000.into())]);
    let o = bin(&["ensemble", "--config", s(&config), "--out", s(tmp.path()), "--replicates", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("3 of 3 replicates completed"));
    let one = bin(&["ensemble", "--config", s(&config), "--out", s(tmp.path()), "--replicates", "1"]);
    assert_eq!(one.status.code(), Some(1));
}
