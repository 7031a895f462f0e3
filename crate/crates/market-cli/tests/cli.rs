//! End-to-end tests of the `predmarket` binary: exit codes, output
//! files, and reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn predmarket() -> Command {
    Command::new(env!("CARGO_BIN_EXE_predmarket"))
}

fn run_scenario_file(dir: &Path, text: &str) -> Output {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    predmarket().arg("run").arg(&path).output().unwrap()
}

const PARITY: &str = r#"
engine = "finite"

[finite.builder]
name = "parity"

[realization.assign]
X1 = 0
X2 = 1
A = 0
"#;

#[test]
fn verify_is_byte_identical_for_equal_seeds() {
    let run = || {
        predmarket()
            .args(["verify", "all", "--seed", "11", "--count", "6"])
            .output()
            .unwrap()
    };
    let first = run();
    let second = run();
    assert!(first.status.success(), "{first:?}");
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn verify_seed_changes_the_generated_models() {
    let run = |seed: &str| {
        predmarket()
            .args(["verify", "bounds", "--seed", seed, "--count", "6"])
            .output()
            .unwrap()
    };
    // Both pass, but the reported round statistics differ.
    let a = run("1");
    let b = run("2");
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn verify_rejects_unknown_suites() {
    let out = predmarket().args(["verify", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn run_parity_scenario_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let trace_path = dir.path().join("trace.json");
    let text = format!(
        "{PARITY}\n[output]\nreport = {:?}\ntrace = {:?}\n",
        report_path, trace_path
    );
    let out = run_scenario_file(dir.path(), &text);
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("\"classification\": \"vacuous\""));
    assert!(stdout.contains("\"prob\": \"1/2\""));
    assert_eq!(fs::read_to_string(&report_path).unwrap(), stdout);

    let trace: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&trace_path).unwrap()).unwrap();
    assert_eq!(trace["steps"].as_array().unwrap().len(), 2);
    assert_eq!(trace["rounds_to_convergence"], serde_json::json!(1));
}

#[test]
fn run_gaussian_scenario_writes_csv_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("trace.csv");
    let text = format!(
        r#"
engine = "gaussian"

[gaussian.inline]
x_names = ["x"]
z_names = ["z"]
y_name = "y"
mean = [0.0, 0.0, 0.0]
dispersion = [[4.0, 2.0, 1.0], [2.0, 3.0, 1.0], [1.0, 1.0, 2.0]]

[realization]
x = [1.0]
z = [-1.0]

[output]
trace = {trace_path:?}
"#
    );
    let out = run_scenario_file(dir.path(), &text);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"kind\": \"gaussian\""));
    let trace = fs::read_to_string(&trace_path).unwrap();
    assert!(trace.starts_with("round,expert,mean,sd,new_statistic\n"));
}

#[test]
fn missing_config_file_exits_two() {
    let out = predmarket()
        .args(["run", "/nonexistent/scenario.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_toml_exits_two_with_line_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario_file(dir.path(), "engine = \"finite\"\nnot toml");
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn inconsistent_realization_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario_file(dir.path(), &PARITY.replace("A = 0", "A = 1"));
    assert_eq!(out.status.code(), Some(3));
}

/// A dataset with the study's shape (26 columns, 82 complete rows) but
/// random contents: it loads fine and replicates cleanly, just against
/// the wrong numbers.
fn synthetic_dataset() -> String {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(93);
    let mut out = String::new();
    for _ in 0..82 {
        let row: Vec<String> = (0..26)
            .map(|_| format!("{:.2}", rng.random_range(1.0..100.0f64)))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[test]
fn replicate_table1_reports_mismatch_on_wrong_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("93cars.csv");
    fs::write(&data, synthetic_dataset()).unwrap();
    let out = predmarket()
        .arg("replicate-table1")
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("82 complete cases"), "{stdout}");
    assert!(stdout.contains("FAIL"), "{stdout}");
    assert!(stdout.contains("MISMATCH"), "{stdout}");
}

#[test]
fn replicate_table1_rejects_wrong_shape() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("93cars.csv");
    let truncated: String = synthetic_dataset().lines().take(50).map(|l| format!("{l}\n")).collect();
    fs::write(&data, truncated).unwrap();
    let out = predmarket()
        .arg("replicate-table1")
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("82"));
}

#[test]
fn replicate_table1_without_dataset_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = predmarket()
        .arg("replicate-table1")
        .current_dir(dir.path())
        .env_remove("PREDMARKET_DATA_DIR")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("PREDMARKET_DATA_DIR"), "{stderr}");
}
