use std::fs;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bmconform"));
    cmd.env_remove("BMCONFORM_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bmconform")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

const SMALL: &str = r#"
schema_version = 1
name = "small"
seed = 5
paths = 400
[law]
dim = 2
[grid]
horizon = 2.0
steps = 100
[resampling]
permutations = 99
bootstrap = 49
[[tests]]
kind = "suite"
"#;

#[test]
fn alpha_out_of_range_exits_2() {
    let out = run(&["--alpha", "1.5", "run", "--builtin", "affine-sanity"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn bad_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "schema_version = 1\nname = \"x\"\nalpah = 0.1\n[law]\ndim = 2\n").unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "run"]);
    assert_eq!(out.status.code(), Some(2));

    let missing = run(&["--config", "/nonexistent/x.toml", "run"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(run(&["conform", "--frobnicate"]).status.code(), Some(2));
}

#[test]
fn corrupt_paths_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.bin");
    fs::write(&path, b"not a paths file at all, definitely").unwrap();
    let out = run(&["conform", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn small_suite_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let c = cfg.to_str().unwrap();
    let a = run(&["--config", c, "--threads", "1", "run"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = bin().env("BMCONFORM_THREADS", "3").args(["--config", c, "run"]).output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    let report = json(&a);
    assert_eq!(report["overall"]["verdict"], "pass");
    assert!(report["meta"]["duration_ms"].is_null());
    assert_eq!(report["meta"]["seed"], 5);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "--seed", "77", "run"]);
    assert_eq!(json(&out)["meta"]["seed"], 77);
}

#[test]
fn timing_flag_fills_meta() {
    let out = run(&["--timing", "run", "--builtin", "pde-gallery"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert!(report["meta"]["duration_ms"].is_number());
}

#[test]
fn pde_gallery_formats() {
    let csv = run(&["--format", "csv", "pde"]);
    assert_eq!(csv.status.code(), Some(0));
    let text = String::from_utf8(csv.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("name,"));
    assert!(lines.len() > 10);

    let summary = run(&["--format", "summary", "pde"]);
    assert!(String::from_utf8(summary.stdout).unwrap().contains("expectations: met"));
}

#[test]
fn nonflat_field_exits_1() {
    let out = run(&["pde", "--field", "harmonic(re_z^2)", "--samples", "20000"]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert_eq!(report["overall"]["verdict"], "reject");
}

#[test]
fn simulate_then_conform_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let paths = dir.path().join("p.bin");
    let out = run(&["--paths", "300", "--seed", "9", "--out", paths.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(0));
    let report_path = dir.path().join("r.json");
    let out = run(&[
        "--out",
        report_path.to_str().unwrap(),
        "conform",
        "--input",
        paths.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&report_path).unwrap()).unwrap();
    assert_eq!(report["config"]["paths"], 300);
    assert!(report["reports"].as_array().unwrap().iter().any(|r| r["name"] == "conformance_suite"));
}

#[test]
fn simulate_csv_layout() {
    let out = run(&["--paths", "100", "simulate", "--paths-format", "csv", "--steps", "4", "--dim", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    // header + N * (K + 1) rows
    assert_eq!(text.lines().count(), 1 + 100 * 5);
}

#[test]
fn list_builtins() {
    let out = run(&["run", "--list"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["affine-sanity", "counterexample", "pde-gallery"] {
        assert!(text.contains(name));
    }
}
