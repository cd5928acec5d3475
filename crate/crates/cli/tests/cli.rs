use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn decodi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decodi")).args(args).output().expect("spawn decodi")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn run_ok(args: &[&str]) -> String {
    let out = decodi(args);
    assert!(
        out.status.success(),
        "decodi {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn generate_writes_both_arms_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "seed_count = 200\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["generate", "--config", &cfg, "--out", a.to_str().unwrap()]);
    run_ok(&["generate", "--config", &cfg, "--out", b.to_str().unwrap(), "--jobs", "4"]);
    for name in ["original.jsonl", "debiased.jsonl"] {
        let text = fs::read_to_string(a.join(name)).unwrap();
        assert_eq!(text.lines().count(), 200, "{name}");
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert!(a.join("manifest.json").exists());
    assert!(a.join("world.toml").exists());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"].as_array().map(|s| s.len()), Some(200));
}

#[test]
fn zero_seeds_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "seed_count = 0\n");
    let out = decodi(&["generate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed_count"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "seeds_count = 10\n");
    let out = decodi(&["generate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_record_file_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "seed_count = 10\n");
    let missing = dir.path().join("nope.jsonl");
    let out = decodi(&[
        "evaluate",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
        "--original",
        missing.to_str().unwrap(),
        "--debiased",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.jsonl"));
}

#[test]
fn noiseless_annotators_agree_perfectly() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"seed_count = 50
reference_draws = 200
annotators = [{ id = "a", rho = 0.0 }, { id = "b", rho = 0.0 }]
"#,
    );
    let out = dir.path().to_str().unwrap();
    run_ok(&["generate", "--config", &cfg, "--out", out]);
    run_ok(&["evaluate", "--config", &cfg, "--out", out]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let comps = report["comparisons"].as_array().unwrap();
    assert!(!comps.is_empty());
    for c in comps {
        assert_eq!(c["agreement"].as_f64(), Some(1.0));
    }
    for name in ["ratios.csv", "comparisons.csv", "summary.txt"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn evaluate_reproduces_nurse_bias_without_amplified_guidance() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"seed_count = 2000
reference_draws = 200
annotators = [{ id = "a", rho = 0.0 }]

[guidance]
guidance_scale = 1.0
"#,
    );
    let out = dir.path().to_str().unwrap();
    run_ok(&["generate", "--config", &cfg, "--out", out, "--jobs", "4"]);
    run_ok(&["evaluate", "--config", &cfg, "--out", out]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let arm = report["arms"].as_array().unwrap().iter().find(|a| a["mode"] == "original").unwrap();
    let gender = arm["ratio_tables"].as_array().unwrap().iter().find(|t| t["attribute"] == "gender").unwrap();
    let female = gender["rows"].as_array().unwrap().iter().find(|r| r["value"] == "female").unwrap();
    let pct = female["percentage"].as_f64().unwrap();
    assert!((pct - 99.5).abs() <= 3.0, "female {pct}%");
}

#[test]
fn zero_bias_sweep_row_matches_baseline_and_duplicates_collapse() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"seed_count = 40

[guidance]
momentum_scale = 0.0

[sweep]
bias_scale = [0.0, 0.0]
"#,
    );
    let out = dir.path().to_str().unwrap();
    run_ok(&["sweep", "--config", &cfg, "--out", out]);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "{csv}");
    let metrics = |l: &str| l.split(',').skip(6).map(str::to_string).collect::<Vec<_>>();
    assert_eq!(metrics(lines[1]), metrics(lines[2]));
}

#[test]
fn sweep_output_independent_of_jobs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "seed_count = 30\n\n[sweep]\nbias_scale = [0.0, 7.0]\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["sweep", "--config", &cfg, "--out", a.to_str().unwrap(), "--jobs", "1"]);
    run_ok(&["sweep", "--config", &cfg, "--out", b.to_str().unwrap(), "--jobs", "4"]);
    assert_eq!(fs::read(a.join("sweep.csv")).unwrap(), fs::read(b.join("sweep.csv")).unwrap());
}

#[test]
fn seed_file_overrides_seed_count() {
    let dir = TempDir::new().unwrap();
    let seeds = dir.path().join("seeds.txt");
    fs::write(&seeds, "# chosen seeds\n4\n8\n15\n").unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["generate", "--out", out, "--seed-file", seeds.to_str().unwrap()]);
    let text = fs::read_to_string(dir.path().join("original.jsonl")).unwrap();
    let got: Vec<u64> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(got, vec![4, 8, 15]);
}

#[test]
fn print_config_round_trips_and_worlds_lists_builtins() {
    let text = run_ok(&["print-config"]);
    assert!(text.contains("guidance_scale"));
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &text);
    assert_eq!(run_ok(&["print-config", "--config", &cfg]), text);
    let worlds = run_ok(&["worlds"]);
    for name in ["nurse", "firefighter", "ceo"] {
        assert!(worlds.contains(name), "{worlds}");
    }
}
