//! End-to-end checks of the command-line interface: exit codes, the CSV
//! contract, and byte stability of repeated runs.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn rdkit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rdkit"))
}

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("rdkit-cli-test-{}-{name}", std::process::id()));
    p
}

fn write_spec(name: &str, body: &str) -> PathBuf {
    let path = temp_path(name);
    fs::write(&path, body).unwrap();
    path
}

const MAXMIX_SPEC: &str = r#"{
  "format": 1,
  "kind": "quantum",
  "input": {"type": "maximally_mixed", "n": 2},
  "distortion": {"type": "entanglement_fidelity"},
  "kappa_list": [0.5, 1.0, 2.0]
}"#;

const CLASSICAL_SPEC: &str = r#"{
  "format": 1,
  "kind": "classical",
  "input": {"type": "uniform_distribution", "n": 3},
  "distortion": {"type": "hamming"},
  "kappa_list": [0.5, 1.5]
}"#;

const RANDOM_SPEC: &str = r#"{
  "format": 1,
  "kind": "quantum",
  "input": {"type": "random", "n": 3, "seed": 5},
  "distortion": {"type": "entanglement_fidelity"},
  "kappa_list": [1.0, 2.0]
}"#;

#[test]
fn run_emits_expected_csv() {
    let spec = write_spec("maxmix.json", MAXMIX_SPEC);
    let out = temp_path("curve.csv");
    let status = rdkit()
        .args(["run"])
        .arg(&spec)
        .args(["--method", "newton", "--inexact", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kappa,D,rate_bits,gap_bits,outer_iters,inner_iters,time_s,method,symmetry"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert_eq!(fields[7], "newton");
        assert_eq!(fields[8], "on");
        // Gap column populated for entanglement-fidelity runs.
        assert!(!fields[3].is_empty());
    }
    // Rows sorted by kappa.
    let kappas: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(kappas.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn run_is_byte_stable_modulo_timing() {
    let spec = write_spec("stable.json", RANDOM_SPEC);
    let strip_time = |text: &str| -> String {
        text.lines()
            .map(|line| {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() == 9 {
                    let mut kept = fields.clone();
                    kept.remove(6);
                    kept.join(",")
                } else {
                    line.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = temp_path(&format!("stable-{i}.csv"));
        let status = rdkit()
            .args(["run"])
            .arg(&spec)
            .args(["--seed", "5", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(strip_time(&fs::read_to_string(&out).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1], "CSV output is not deterministic");
}

#[test]
fn run_supports_classical_problems_and_threads() {
    let spec = write_spec("classical.json", CLASSICAL_SPEC);
    let out = temp_path("classical.csv");
    let status = rdkit()
        .args(["run"])
        .arg(&spec)
        .args(["--threads", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().contains(",ba,"));
}

#[test]
fn unsorted_kappa_list_is_sorted_in_output() {
    let spec = write_spec("unsorted.json", r#"{
      "format": 1,
      "kind": "quantum",
      "input": {"type": "maximally_mixed", "n": 2},
      "distortion": {"type": "entanglement_fidelity"},
      "kappa_list": [2.0, 0.5, 1.0]
    }"#);
    let output = rdkit().args(["run"]).arg(&spec).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    let kappas: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|r| r.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(kappas, vec![0.5, 1.0, 2.0]);
}

#[test]
fn explicit_classical_distortion_runs() {
    let spec = write_spec("explicit-classical.json", r#"{
      "format": 1,
      "kind": "classical",
      "input": {"type": "explicit_distribution", "probabilities": [0.25, 0.75]},
      "distortion": {"type": "explicit_classical",
                     "matrix": {"rows": 2, "cols": 2, "entries": [0.0, 2.0, 1.0, 0.0]}},
      "kappa_list": [1.0]
    }"#);
    let output = rdkit().args(["run"]).arg(&spec).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().contains(",ba,"));
}

#[test]
fn malformed_spec_exits_one_naming_field() {
    let spec = write_spec("bad.json", r#"{"format": 9, "kind": "quantum",
        "input": {"type": "maximally_mixed", "n": 2},
        "distortion": {"type": "entanglement_fidelity"},
        "kappa_list": [1.0]}"#);
    let output = rdkit().args(["run"]).arg(&spec).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("format"), "stderr does not name the field: {stderr}");
}

#[test]
fn missing_file_exits_one() {
    let output = rdkit()
        .args(["run", "/nonexistent/path/spec.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn oracle_outputs_analytic_curves() {
    let output = rdkit()
        .args(["oracle", "--maxmix", "4", "--grid", "50"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert_eq!(text.lines().next().unwrap(), "D,rate_bits");
    assert_eq!(text.lines().count(), 51);
    // Rates decrease with distortion along the curve.
    let rates: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(rates.windows(2).all(|w| w[0] >= w[1]));

    let output = rdkit()
        .args(["oracle", "--hamming", "2", "--grid", "10"])
        .output()
        .unwrap();
    assert!(output.status.success());
}

#[test]
fn timeout_rows_flagged_with_exit_two() {
    let spec = write_spec("timeout.json", r#"{
      "format": 1,
      "kind": "quantum",
      "input": {"type": "random", "n": 8, "seed": 1},
      "distortion": {"type": "entanglement_fidelity"},
      "kappa_list": [1.0]
    }"#);
    let output = rdkit()
        .args(["run"])
        .arg(&spec)
        .args(["--max-time", "0.0"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("did not converge"), "missing warning: {stderr}");
}

#[test]
fn compare_emits_four_way_table() {
    let spec = write_spec("compare.json", r#"{
      "format": 1,
      "kind": "quantum",
      "input": {"type": "maximally_mixed", "n": 2},
      "distortion": {"type": "entanglement_fidelity"},
      "kappa_list": [1.0]
    }"#);
    let output = rdkit()
        .args(["compare"])
        .arg(&spec)
        .args(["--methods", "newton,gd", "--repeats", "1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert_eq!(
        text.lines().next().unwrap(),
        "method,mode,kappa,median_time_s,gap_bits,outer_iters,inner_iters"
    );
    // newton/gd × exact/inexact at one κ.
    assert_eq!(text.lines().count(), 5);
    for mode in ["newton,exact", "newton,inexact", "gd,exact", "gd,inexact"] {
        assert!(text.contains(mode), "missing configuration {mode}");
    }
}
