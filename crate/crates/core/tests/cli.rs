use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qform_tails::calibration::Calibration;
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qform-tails"))
}

fn run(sub: &str, config: &Value, extra: &[&str]) -> (tempfile::TempDir, Output) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, config.to_string()).unwrap();
    let out = bin()
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(extra)
        .output()
        .unwrap();
    (dir, out)
}

fn out_file(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join("out").join(name)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect::<Vec<_>>();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect::<Vec<_>>())
        .collect::<Vec<_>>();
    for r in &rows {
        assert_eq!(r.len(), header.len());
    }
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bounds_zero_matrix_gives_two_at_origin() {
    let (dir, out) = run(
        "bounds",
        &json!({"A": {"zeros": 3}, "t": [0.0, 1.0], "curves": ["traceCorollary", "hsCorollary", "rudelsonVershynin"]}),
        &[],
    );
    assert_ok(&out);
    let (h, rows) = read_csv(&out_file(&dir, "bounds.csv"));
    assert_eq!(rows.len(), 2);
    let tc = col(&h, "bound_traceCorollary");
    assert_eq!(rows[0][tc].parse::<f64>().unwrap(), 2.0);
    assert_eq!(rows[1][tc].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][col(&h, "clamp_traceCorollary")], "true");
    let meta = read_json(&out_file(&dir, "bounds.json"));
    assert_eq!(meta["csv"], "bounds.csv");
}

#[test]
fn bounds_csv_uses_full_precision_and_decreases() {
    let (dir, out) = run(
        "bounds",
        &json!({"A": {"rows": [[1.0, 0.5], [0.5, 2.0]]}, "K": 1.0, "constants": {"C1": 1.0, "C2": 1.0},
                "t": {"start": 0.1, "stop": 100.0, "count": 25, "log": true}}),
        &[],
    );
    assert_ok(&out);
    let (h, rows) = read_csv(&out_file(&dir, "bounds.csv"));
    assert_eq!(rows.len(), 25);
    let i = col(&h, "bound_hsCorollary");
    let vals: Vec<f64> = rows.iter().map(|r| r[i].parse().unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    let mantissa = rows[3][i].split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}

#[test]
fn bad_config_reports_single_json_line() {
    let (_dir, out) = run("simulate", &json!({"A": {"identity": 2}}), &[]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    let v: Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(v["error"], "config");
    assert_eq!(v["subcommand"], "simulate");
    assert!(v["message"].as_str().unwrap().contains("simulate config"));

    let (_dir, out) = run("bounds", &json!({"A": {"rows": [[1.0, 2.0]]}, "t": [1.0]}), &[]);
    assert!(!out.status.success());
    let v: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(v["error"], "shape");
}

#[test]
fn missing_config_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["norms", "--config"])
        .arg(dir.path().join("nope.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let v: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(v["error"], "io");
}

#[test]
fn simulate_echoes_seed_override_and_config() {
    let cfg = json!({
        "model": {"variant": "gaussianLinear", "M": {"identity": 4}},
        "A": {"diag": [1.0, -1.0, 0.5, 2.0]},
        "sampleCount": 2000,
        "thresholds": [0.0, 1.0, 5.0],
        "chunkCount": 4,
        "seed": 1,
    });
    let (dir, out) = run("simulate", &cfg, &["--seed", "77", "--workers", "2"]);
    assert_ok(&out);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["csv"], "tail_report.csv");
    let meta = read_json(&out_file(&dir, "tail_report.json"));
    assert_eq!(meta["config"]["seed"], 77);
    assert_eq!(meta["seed"]["seed"], 77);
    assert_eq!(meta["metadata"]["sample_count"].as_u64().or(meta["metadata"]["sampleCount"].as_u64()), Some(2000));
    let (h, rows) = read_csv(&out_file(&dir, "tail_report.csv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(h[0], "t");
    assert_eq!(h.last().unwrap(), "exceed_count");
    // P(|q - Eq| >= 0) = 1
    assert_eq!(rows[0][col(&h, "empirical")].parse::<f64>().unwrap(), 1.0);
    assert_eq!(rows[0][col(&h, "exceed_count")], "2000");
}

#[test]
fn simulate_rademacher_leaves_gaussian_curve_blank() {
    let cfg = json!({
        "model": {"variant": "rademacherLinear", "M": {"identity": 3}},
        "A": {"identity": 3},
        "sampleCount": 1000,
        "thresholds": "auto",
        "chunkCount": 2,
    });
    let (dir, out) = run("simulate", &cfg, &["--workers", "1"]);
    assert_ok(&out);
    let (h, rows) = read_csv(&out_file(&dir, "tail_report.csv"));
    let g = col(&h, "bound_gaussianHW");
    assert!(rows.iter().all(|r| r[g].is_empty()));
    assert!(rows.iter().all(|r| !r[col(&h, "bound_traceCorollary")].is_empty()));
    let meta = read_json(&out_file(&dir, "tail_report.json"));
    assert!(meta["metadata"]["not_applicable"].is_array() || meta["metadata"]["notApplicable"].is_array());
}

#[test]
fn norms_reports_matrix_and_benchmark() {
    let (dir, out) = run(
        "norms",
        &json!({"matrix": {"diag": [3.0, -4.0]}, "benchmark": "standardNormal", "values": [1.0, 1.0]}),
        &[],
    );
    assert_ok(&out);
    let doc = read_json(&out_file(&dir, "norms.json"));
    let m = &doc["results"]["matrix"];
    let get = |v: &Value, a: &str, b: &str| v[a].as_f64().or(v[b].as_f64()).unwrap();
    assert_eq!(get(m, "operatorNorm", "operator_norm"), 4.0);
    assert_eq!(get(m, "traceNorm", "trace_norm"), 7.0);
    assert!((get(m, "hilbertSchmidt", "hilbert_schmidt") - 5.0).abs() < 1e-15);
    let b = doc["results"]["benchmark"]["estimate"]["value"].as_f64().unwrap();
    assert!((b - (8.0f64 / 3.0).sqrt()).abs() < 1e-9);
    // default tolerance is relative 1e-3; the exact value must lie in the bracket
    let exact = 1.0 / 2f64.ln().sqrt();
    let est = &doc["results"]["values"];
    let (lo, hi) = (est["bracketLow"].as_f64().unwrap(), est["value"].as_f64().unwrap());
    assert!(lo <= exact && exact <= hi && hi - lo <= 1e-3 * lo);
}

#[test]
fn regression_outputs_tables_and_identities() {
    let x = json!([[1.0, 0.0, 1.0, 2.0, -1.0, 0.5], [0.0, 1.0, 1.0, -1.0, 2.0, 0.0]]);
    let (dir, out) = run(
        "regression",
        &json!({"X": x, "u": [0.0, 1.0, 4.0], "identityTrials": 20, "constants": {"C1": 1.0, "C2": std::f64::consts::SQRT_2},
                "monteCarlo": {"sampleCount": 2000, "chunkCount": 4}}),
        &[],
    );
    assert_ok(&out);
    let doc = read_json(&out_file(&dir, "regression.json"));
    assert_eq!(doc["hatInvariantsHold"], true);
    assert_eq!(doc["identityHolds"], true);
    let (h, rows) = read_csv(&out_file(&dir, "regression_bounds.csv"));
    assert_eq!(rows.len(), 3);
    let p = col(&h, "prob_bound");
    let pb: Vec<f64> = rows.iter().map(|r| r[p].parse().unwrap()).collect();
    assert_eq!(pb[0], 2.0);
    // C4 = 8 for these constants
    assert!((pb[2] - 2.0 * (-0.5f64).exp()).abs() < 1e-12);
    assert!(out_file(&dir, "regression_tail.csv").exists());
}

#[test]
fn regression_rejects_singular_design() {
    let (_dir, out) = run("regression", &json!({"X": [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]}), &[]);
    assert!(!out.status.success());
    let v: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(v["error"], "singular_design");
}

#[test]
fn calibrate_output_loads_back() {
    let (dir, out) = run("calibrate", &json!({}), &["--seed", "5"]);
    assert_ok(&out);
    let cal = Calibration::load(&out_file(&dir, "calibration.json")).unwrap();
    let shipped = Calibration::shipped();
    assert_eq!(cal.c1, shipped.c1);
    assert_eq!(cal.c2, shipped.c2);
    assert_eq!(cal.c_rv, shipped.c_rv);
    let consts = cal.constants().unwrap();
    assert!((consts.c4 - 2.0 * consts.c3).abs() < 1e-15);
}

#[test]
fn calibration_file_feeds_other_subcommands() {
    let (dir, out) = run("calibrate", &json!({}), &[]);
    assert_ok(&out);
    let cal_path = out_file(&dir, "calibration.json");
    let (dir2, out2) = run(
        "bounds",
        &json!({"A": {"identity": 2}, "t": [1.0], "constants": cal_path.to_str().unwrap()}),
        &[],
    );
    assert_ok(&out2);
    let meta = read_json(&out_file(&dir2, "bounds.json"));
    let c1 = meta["constants"]["c1"].as_f64().or(meta["constants"]["C1"].as_f64()).unwrap();
    assert_eq!(c1, Calibration::shipped().c1);
}

#[test]
fn relative_paths_resolve_against_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), "1,0\n0,2\n").unwrap();
    let sub = dir.path().join("cfg");
    std::fs::create_dir(&sub).unwrap();
    let cfg = sub.join("c.json");
    std::fs::write(&cfg, json!({"A": "../a.csv", "t": [0.5]}).to_string()).unwrap();
    let out = bin()
        .arg("bounds")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_ok(&out);
    let meta = read_json(&dir.path().join("o/bounds.json"));
    assert_eq!(meta["config"]["A"], "../a.csv");
}
