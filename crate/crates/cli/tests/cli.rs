use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pwabs::dynamics::{generate_dataset, ModelSimulator, PwaModel};
use pwabs::geometry::{sample_uniform, Region};

fn pwabs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwabs"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn small_config(dir: &Path) {
    let cfg = r#"{"grid":[4,4],"refinement_cap":2,"benchmark_passes":2,
        "initial_sample_count":100,"active_sample_budget":5,"batch_size":5}"#;
    fs::write(dir.join("cfg.json"), cfg).unwrap();
}

fn write_case_data(path: &Path, n: usize, noise: f64) {
    let truth = PwaModel::case_study(noise);
    let xs = sample_uniform(&Region::from_polytope(truth.domain().clone()), n, 3).unwrap();
    let data = generate_dataset(&mut ModelSimulator::new(truth, 4), &xs).unwrap();
    data.write_csv(fs::File::create(path).unwrap(), None).unwrap();
}

#[test]
fn pipeline_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    for out in ["a", "b"] {
        let o = pwabs(dir.path(), &["--seed", "9", "--config", "cfg.json", "--out-dir", out, "pipeline"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["model.json", "ts.json", "certificate.json", "report.json", "dataset.csv", "partition.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let model: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("a/model.json")).unwrap()).unwrap();
    assert!(model["modes"].as_array().is_some_and(|m| !m.is_empty()));
    assert!(model.get("noise_sigma").is_some());
}

#[test]
fn check_self_at_zero_holds() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let o = pwabs(dir.path(), &["--config", "cfg.json", "--out-dir", "abs", "abstract", "--model", "model.json"]);
    assert_eq!(o.status.code(), Some(3), "missing model is a config error");

    fs::write(
        dir.path().join("model.json"),
        serde_json::to_string(&PwaModel::case_study(0.0)).unwrap(),
    )
    .unwrap();
    let o = pwabs(dir.path(), &["--config", "cfg.json", "--out-dir", "abs", "abstract", "--model", "model.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["ts.json", "ts.dot", "partition.csv", "automaton.dot", "refinement.json"] {
        assert!(dir.path().join("abs").join(name).exists(), "{name}");
    }
    let o = pwabs(dir.path(), &["check", "--lhs", "abs/ts.json", "--rhs", "abs/ts.json", "--sigma", "0"]);
    assert!(o.status.success());
    let cert: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cert["holds"], true);
    assert_eq!(cert["inputs_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn identify_then_sample() {
    let dir = tempfile::tempdir().unwrap();
    write_case_data(&dir.path().join("data.csv"), 200, 0.0);
    let o = pwabs(dir.path(), &["identify", "--data", "data.csv", "--out", "model.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model: PwaModel = serde_json::from_slice(&fs::read(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(model.mode_count(), 2);
    let clusters = fs::read_to_string(dir.path().join("clusters.csv")).unwrap();
    assert!(clusters.lines().next().unwrap().ends_with("cluster"));
    assert_eq!(clusters.lines().count(), 201);

    let o = pwabs(dir.path(), &["sample", "--model", "model.json", "--data", "clusters.csv", "--n", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let picks = fs::read_to_string(dir.path().join("picks.csv")).unwrap();
    assert_eq!(picks.lines().count(), 5);

    fs::write(
        dir.path().join("truth.json"),
        serde_json::to_string(&PwaModel::case_study(0.0)).unwrap(),
    )
    .unwrap();
    let o = pwabs(
        dir.path(),
        &["sample", "--model", "model.json", "--data", "clusters.csv", "--n", "4", "--truth", "truth.json"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grown = fs::read_to_string(dir.path().join("clusters.csv")).unwrap();
    assert_eq!(grown.lines().count(), 205);
}

#[test]
fn bad_inputs_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pwabs(dir.path(), &["--config", "missing.json", "pipeline"]).status.code(), Some(3));
    assert_eq!(pwabs(dir.path(), &["frobnicate"]).status.code(), Some(3));
    fs::write(dir.path().join("bad.json"), r#"{"grid":[0,4]}"#).unwrap();
    assert_eq!(pwabs(dir.path(), &["--config", "bad.json", "pipeline"]).status.code(), Some(3));
    fs::write(dir.path().join("ts.json"), "{}").unwrap();
    let o = pwabs(dir.path(), &["check", "--lhs", "ts.json", "--rhs", "ts.json", "--sigma", "0.1"]);
    assert_eq!(o.status.code(), Some(3));
}
