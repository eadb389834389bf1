//! End-to-end checks of the `rmab` binary.

use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
players = 2
horizon = 400
collision_model = "share"
seeds = [1, 2]

[[arms]]
states = [1.0, 2.0]
kernel = [[0.9, 0.1], [0.2, 0.8]]
passive_mode = "frozen"

[[arms]]
states = [1.0, 2.0]
kernel = [[0.5, 0.5], [0.5, 0.5]]
passive_mode = "frozen"

[[arms]]
states = [0.5, 1.5]
kernel = [[0.7, 0.3], [0.4, 0.6]]
passive_mode = "frozen"

[policy]
mode = "pre_agreement"

[policy.params.fixed]
L = 2.0
D = 10.0
"#;

fn rmab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rmab"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, CONFIG).unwrap();
    path
}

#[test]
fn validate_accepts_good_config_and_prints_digest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = rmab().arg("validate").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ok: 3 arms, 2 players"));
    assert!(text.contains("digest: "));
}

#[test]
fn validate_rejects_bad_config_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, CONFIG.replace("players = 2", "players = 9")).unwrap();
    let out = rmab().arg("validate").arg(&path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("players"), "stderr: {err}");
}

#[test]
fn derive_params_reports_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = rmab().arg("derive-params").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let l = json["l_threshold"].as_f64().unwrap();
    assert!((l - 25001.289065583773).abs() < 1e-6 * l);
    assert_eq!(json["l_valid"], false);
    assert_eq!(json["binding"], false);
}

#[test]
fn run_writes_artifacts_per_seed_plus_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("results");
    let out = rmab()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out_dir.join("summary.json").exists());
    for seed in [1, 2] {
        assert!(out_dir.join(format!("trace_seed{seed}.csv")).exists());
        assert!(out_dir.join(format!("regret_seed{seed}.csv")).exists());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["n_seeds"], 2);
}

#[test]
fn run_with_seed_override_changes_file_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("results");
    let out = rmab()
        .arg("run")
        .arg(&cfg)
        .arg("--seeds")
        .arg("3")
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    for seed in 0..3 {
        assert!(out_dir.join(format!("trace_seed{seed}.csv")).exists());
    }
}

#[test]
fn run_warns_when_params_below_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = rmab()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("w"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("below the sufficiency thresholds"),
        "missing practical-mode warning, stderr: {err}"
    );
}

#[test]
fn repeat_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = rmab()
            .arg("run")
            .arg(&cfg)
            .arg("--out")
            .arg(out_dir)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    for name in [
        "summary.json",
        "trace_seed1.csv",
        "trace_seed2.csv",
        "regret_seed1.csv",
        "regret_seed2.csv",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs between reruns"
        );
    }
}

#[test]
fn bounds_verb_emits_point_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = rmab()
        .arg("bounds")
        .arg(&cfg)
        .arg("--t")
        .arg("1000")
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["t"], 1000);
    assert!(json["bound_shared"].as_f64().unwrap() > 0.0);
    assert!(json["bound_zero"].as_f64().unwrap() > 0.0);
    assert_eq!(json["n_seeds"], 0);
}

#[test]
fn bounds_rejects_t_before_first_epoch_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = rmab().arg("bounds").arg(&cfg).arg("--t").arg("3").output().unwrap();
    assert!(!out.status.success());
}
