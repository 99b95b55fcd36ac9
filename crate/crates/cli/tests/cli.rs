use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
step0_epochs = 3
restraint_epochs = 2
relaxation_epochs = 2
max_rri = 2
batch_size = 16
hidden_dims = [12, 10]
eigen_dim = 6
data = \"dataset.csv\"
";

fn svdnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svdnet"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Small dataset plus config in a fresh directory.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(svdnet(
        dir.path(),
        &["gen", "--out", ".", "--identities", "8", "--cameras", "2", "--samples-per-id-camera", "3"],
    ));
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

#[test]
fn gen_writes_loadable_dataset() {
    let dir = workspace();
    let text = fs::read_to_string(dir.path().join("dataset.csv")).unwrap();
    assert!(text.starts_with("id,camera,split,f0,"));
    assert_eq!(text.lines().count(), 1 + 8 * 2 * 3);
}

#[test]
fn train_is_reproducible_and_writes_manifest() {
    let dir = workspace();
    for out in ["a", "b"] {
        ok(svdnet(dir.path(), &["train", "--config", "small.toml", "--out", out]));
    }
    let a = fs::read(dir.path().join("a/trace.csv")).unwrap();
    let b = fs::read(dir.path().join("b/trace.csv")).unwrap();
    assert_eq!(a, b);
    for name in ["ckpt_rri0_step0.svdn", "ckpt_rri2_relaxation.svdn"] {
        let ca = fs::read(dir.path().join("a/checkpoints").join(name)).unwrap();
        let cb = fs::read(dir.path().join("b/checkpoints").join(name)).unwrap();
        assert_eq!(ca, cb, "{name} differs");
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["config"]["eigen_dim"], 6);
    assert_eq!(manifest["seed"], 1);
    assert!(manifest["tool_version"].is_string());
    assert!(manifest["artifacts"]["trace"].as_str().unwrap().ends_with("trace.csv"));
}

#[test]
fn flags_override_config() {
    let dir = workspace();
    ok(svdnet(
        dir.path(),
        &["train", "--config", "small.toml", "--out", "o", "--eigen-dim", "4", "--max-rri", "1", "--seed", "9"],
    ));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["eigen_dim"], 4);
    assert_eq!(manifest["seed"], 9);
    let trace = fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 1 + 3);
}

#[test]
fn diagnose_reports_orthogonal_decorrelated_checkpoint() {
    let dir = workspace();
    ok(svdnet(dir.path(), &["train", "--config", "small.toml", "--out", "run"]));
    let stdout = ok(svdnet(
        dir.path(),
        &["diagnose", "run/checkpoints", "--config", "small.toml", "--out", "run"],
    ));
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("checkpoint,rri_index,phase,s_of_w,rank1,mAP"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 1 + 2 * 3);
    assert_eq!(rows[0][2], "step0");
    for row in rows.iter().filter(|r| r[2] == "decorrelate") {
        let s: f64 = row[3].parse().unwrap();
        assert!(s >= 0.999999, "S(W) = {s}");
        assert!(!row[5].is_empty());
    }
    assert!(dir.path().join("run/diagnose.csv").exists());
}

#[test]
fn eval_scores_checkpoint() {
    let dir = workspace();
    ok(svdnet(dir.path(), &["train", "--config", "small.toml", "--out", "run"]));
    let stdout = ok(svdnet(
        dir.path(),
        &["eval", "run/checkpoints/ckpt_rri1_decorrelate.svdn", "--config", "small.toml", "--out", "run"],
    ));
    assert!(stdout.contains("mAP"));
    let report = fs::read_to_string(dir.path().join("run/report.csv")).unwrap();
    assert!(report.starts_with("metric,value\nmAP,"));

    // decorrelation keeps retrieval quality
    let trace = fs::read_to_string(dir.path().join("run/trace.csv")).unwrap();
    let step0_map: f64 = trace.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    let eval_map: f64 = report.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let decor_map: f64 = trace.lines().nth(2).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(eval_map, decor_map);
    assert!((eval_map - step0_map).abs() < 1e-9);
}

#[test]
fn compare_and_sweep_write_tables() {
    let dir = workspace();
    ok(svdnet(
        dir.path(),
        &["compare", "--config", "small.toml", "--out", "cmp", "--methods", "orig,us,qd"],
    ));
    let csv = fs::read_to_string(dir.path().join("cmp/compare.csv")).unwrap();
    let methods: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["orig", "us", "qd"]);

    ok(svdnet(
        dir.path(),
        &["sweep-dim", "--config", "small.toml", "--out", "sw", "--dims", "2,4", "--max-rri", "1"],
    ));
    let csv = fs::read_to_string(dir.path().join("sw/sweep_dim.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("dim,step0_rank1,step0_mAP,rri_rank1,rri_mAP"));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "max_rri = 3\nlearning_rate = 0.1\n").unwrap();
    let out = svdnet(dir.path(), &["train", "--config", "bad.toml", "--out", "o"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("learning_rate"), "{err}");
}

#[test]
fn invalid_values_fail_with_key_name() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "max_rri = \"many\"\n").unwrap();
    let out = svdnet(dir.path(), &["train", "--config", "bad.toml", "--out", "o"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_rri"));

    let out = svdnet(dir.path(), &["train", "--step0-epochs", "0", "--out", "o"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("step0_epochs"));
}

#[test]
fn missing_dataset_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = svdnet(dir.path(), &["train", "--data", "nope.csv", "--out", "o"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}
