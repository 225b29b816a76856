//! Harness behavior: exit codes, config validation, format selection, the
//! experiment registry, and seed precedence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stokit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stokit"))
        .args(args)
        .current_dir(dir)
        .env_remove("STOKIT_SEED")
        .output()
        .expect("binary runs")
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stokit-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn list_prints_sorted_registry() {
    let dir = tmpdir("list");
    let out = stokit(&dir, &["list"]);
    assert!(out.status.success());
    let names: Vec<&str> = std::str::from_utf8(&out.stdout).unwrap().lines().collect();
    assert_eq!(names, vec!["calculus", "exit", "manifold", "moments", "order", "rds", "simulate"]);
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn unknown_experiment_gets_a_suggestion() {
    let dir = tmpdir("suggest");
    let out = stokit(&dir, &["list", "momments"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("did you mean 'moments'"), "{err}");
}

#[test]
fn validation_errors_exit_2() {
    let dir = tmpdir("exit2");
    let out = stokit(&dir, &["simulate", "--paths", "0"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // Config parse failures list every error and also exit 2.
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "[runn]\nx = 1\n[run]\npaths = 0\ndt = -2\n").unwrap();
    let out = stokit(&dir, &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown section"), "{err}");
    assert!(err.contains("paths"), "{err}");
    assert!(err.contains("dt"), "{err}");
}

#[test]
fn runtime_failures_exit_1_with_diagnostic_json() {
    let dir = tmpdir("exit1");
    // Ensemble of the exact scheme is a documented capability error at run
    // time (resolution succeeds, the experiment fails).
    let cfg = dir.join("exact.cfg");
    fs::write(
        &cfg,
        "[model]\nname = population\nparams = r:0.5, alpha:0.5\n[run]\nscheme = exact\npaths = 10\n",
    )
    .unwrap();
    let out = stokit(&dir, &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    let diag: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(diag["experiment"], "simulate");
    assert!(diag["error"].as_str().unwrap().contains("capability"));
}

#[test]
fn json_only_format_produces_no_csv() {
    let dir = tmpdir("jsononly");
    let out = stokit(
        &dir,
        &["simulate", "--format", "json", "--paths", "50", "--t-final", "0.1", "--out", "j"],
    );
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("j/manifest.json")).unwrap()).unwrap();
    let files: Vec<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert!(!files.is_empty());
    assert!(files.iter().all(|f| !f.ends_with(".csv")), "CSV artifact leaked: {files:?}");
    for f in &files {
        assert!(dir.join("j").join(f).exists());
    }
}

#[test]
fn seed_precedence_flag_env_config_default() {
    let dir = tmpdir("seed");
    let cfg = dir.join("seeded.cfg");
    fs::write(&cfg, "[run]\nseed = 7\npaths = 1\nt_final = 0.05\n").unwrap();
    let run = |extra_env: Option<u64>, args: &[&str]| -> u64 {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_stokit"));
        cmd.args(args).current_dir(&dir).env_remove("STOKIT_SEED");
        if let Some(s) = extra_env {
            cmd.env("STOKIT_SEED", s.to_string());
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let manifest: serde_json::Value =
            serde_json::from_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
        manifest["seed"].as_u64().unwrap()
    };
    let base = ["simulate", "--config", cfg.to_str().unwrap(), "--out", "s"];
    // flag > env > config.
    let mut with_flag = base.to_vec();
    with_flag.extend_from_slice(&["--seed", "99"]);
    assert_eq!(run(Some(55), &with_flag), 99);
    assert_eq!(run(Some(55), &base), 55);
    assert_eq!(run(None, &base), 7);
    // default when nothing specifies one
    assert_eq!(run(None, &["simulate", "--paths", "1", "--t-final", "0.05", "--out", "s2"]), 42);
}

#[test]
fn config_experiment_mismatch_is_a_usage_error() {
    let dir = tmpdir("mismatch");
    let cfg = dir.join("m.cfg");
    fs::write(&cfg, "[run]\nexperiment = moments\npaths = 10\n").unwrap();
    let out = stokit(&dir, &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manifest_lists_exactly_the_written_files() {
    let dir = tmpdir("manifest");
    let out = stokit(&dir, &["order", "--paths", "100", "--out", "m"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("m/manifest.json")).unwrap()).unwrap();
    let mut files: Vec<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let mut on_disk: Vec<String> = fs::read_dir(dir.join("m"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    files.sort();
    on_disk.sort();
    assert_eq!(files, on_disk);
    // Artifacts are self-describing: seed and resolved config embedded.
    let csv = fs::read_to_string(dir.join("m/order.csv")).unwrap();
    assert!(csv.starts_with("# seed = 42\n"));
    assert!(csv.contains("# [run]"));
    assert!(csv.contains("dt,rms_error\n"));
    assert!(csv.ends_with('\n'));
}
