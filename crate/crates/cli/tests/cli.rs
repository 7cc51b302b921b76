use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use asian_greeks::engine::{ExperimentConfig, ExperimentReport};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_asian-greeks"));
    cmd.env_remove("ASIAN_GREEKS_WORKERS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path
}

const TINY: &str = r#"{
  "options": ["call", "up-and-out"],
  "greeks": ["delta", "vega"],
  "strikes": [100.0],
  "dims": [8],
  "methods": ["MC-MV", "QMC-MV", "MC-CMV", "QMC-CMV"],
  "m_batches": 4,
  "n_samples": 256,
  "gpca_pilot_size": 64,
  "record_timing": false,
  "output": { "csv": "out.csv", "markdown": "out.md" }
}"#;

#[test]
fn validate_fast_passes() {
    let o = run(&["validate", "--level", "fast"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    for name in [
        "stratification",
        "inverse-normal",
        "factorization",
        "quadrature-equivalence",
    ] {
        assert!(text.contains(&format!("PASS {name}")), "{text}");
    }
}

#[test]
fn corrupted_direction_numbers_fail_stratification() {
    let table = fixture("corrupt-direction-numbers.txt");
    let o = run(&["validate", "--direction-numbers", table.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("FAIL stratification"), "{text}");
    assert!(text.contains("failed checks: stratification"), "{text}");
}

#[test]
fn unknown_validation_level() {
    assert_eq!(
        run(&["validate", "--level", "thorough"]).status.code(),
        Some(2)
    );
}

#[test]
fn greek_prints_json() {
    let o = run(&[
        "greek", "--option", "binary", "--greek", "vega", "--method", "mc-mv", "--N", "4", "--M",
        "2", "--d", "8",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["method"], "MC-MV");
    assert_eq!(v["option"], "binary");
    assert_eq!(v["n_samples"], 4);
    assert!(v["mean"].is_number() && v["std_err"].is_number());
}

#[test]
fn greek_qmc_cmv_call_delta() {
    let o = run(&[
        "greek", "--option", "call", "--greek", "delta", "--K", "100", "--d", "64", "--method",
        "qmc-cmv", "--M", "8", "--N", "1024",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let mean = v["mean"].as_f64().unwrap();
    let se = v["std_err"].as_f64().unwrap();
    assert!((mean - 0.65973).abs() < 5.0 * se + 1e-3, "{mean} ± {se}");
}

#[test]
fn greek_rejects_bad_flags() {
    for args in [
        &["greek", "--K", "-5"][..],
        &["greek", "--method", "qmc-foo"],
        &["greek", "--option", "put"],
        &["greek", "--method", "qmc-mv", "--N", "1000"],
        &["greek", "--d", "1"],
        &["greek", "--sigma", "0"],
        &["greek", "--option", "up-and-out", "--H", "90"],
        &["greek", "--unknown-flag"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn workers_env_is_validated() {
    let o = bin()
        .env("ASIAN_GREEKS_WORKERS", "0")
        .args([
            "greek", "--method", "mc-mv", "--N", "4", "--M", "2", "--d", "4",
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn print_config_emits_defaults() {
    let o = run(&["run", "--print-config"]);
    assert!(o.status.success());
    let parsed = ExperimentConfig::from_json(&stdout(&o)).unwrap();
    assert_eq!(parsed, ExperimentConfig::default());
    assert_eq!((parsed.m_batches, parsed.n_samples), (500, 32768));
}

#[test]
fn dry_run_lists_the_desk_plan() {
    let dir = tempfile::tempdir().unwrap();
    let desk = repo_config("desk.json");
    let o = run(&[
        "run",
        desk.to_str().unwrap(),
        "--dry-run",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("216 cells"), "{text}");
    assert!(text.contains("binary delta K=90 d=64 MC-MV"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn shipped_configs_parse() {
    for name in ["desk.json", "paper.json"] {
        let text = std::fs::read_to_string(repo_config(name)).unwrap();
        ExperimentConfig::from_json(&text)
            .unwrap()
            .validate()
            .unwrap();
    }
    let desk = std::fs::read_to_string(repo_config("desk.json")).unwrap();
    assert_eq!(desk, asian_greeks::engine::CONFIG_EXAMPLE);
}

#[test]
fn malformed_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\n  \"seed\": 1,\n  \"m_batches\": ,\n}\n");
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "{\n  \"methods\": []\n}\n");
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("methods"), "{}", stderr(&o));

    let o = run(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_reports_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("w{workers}"));
        std::fs::create_dir(&out).unwrap();
        let o = run(&[
            "--workers",
            workers,
            "run",
            cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("16 cells"), "{}", stdout(&o));
        let csv = std::fs::read(out.join("out.csv")).unwrap();
        let md = std::fs::read_to_string(out.join("out.md")).unwrap();
        assert!(md.contains("### call: VRFs"));
        outputs.push(csv);
    }
    assert_eq!(outputs[0], outputs[1]);
    let report = ExperimentReport::read_csv(&outputs[0][..]).unwrap();
    assert_eq!(report.rows.len(), 16);
    assert!(report.is_complete());
    assert!(report
        .rows
        .iter()
        .filter(|r| r.method.to_string() == "MC-MV")
        .all(|r| r.vrf == 1.0));
}

#[test]
fn failing_cells_exit_one_with_partial_report() {
    // r = 800 overflows the price exponentials, so the batch means are non-finite.
    let dir = tempfile::tempdir().unwrap();
    let json = TINY.replace("\"options\"", "\"market\": { \"s0\": 100.0, \"sigma\": 0.2, \"r\": 800.0, \"maturity\": 1.0 },\n  \"options\"");
    let cfg = write_config(dir.path(), &json);
    let o = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    let report = ExperimentReport::load_csv(&dir.path().join("out.csv")).unwrap();
    assert_eq!(report.rows.len(), 16);
    assert!(!report.is_complete());
}
