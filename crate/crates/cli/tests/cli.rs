use std::path::Path;
use std::process::{Command, Output};

fn regretcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regretcast"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = "[market]\nn_bidders = 4\n";

#[test]
fn end_to_end_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let common = ["--config", &cfg, "--out", out, "--seed", "5"];
    for cmd in ["simulate", "prepare"] {
        let o = regretcast(&[&[cmd][..], &common].concat());
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let run = [&["run"][..], &common, &["--methods", "OGD,AR2Econ", "--modes", "series"]].concat();
    assert!(regretcast(&run).status.success());
    let first = std::fs::read(dir.path().join("summary.md")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert!(text.contains("AR2Econ") && text.contains("OGD") && !text.contains("stepahead ("));

    assert!(regretcast(&run).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("summary.md")).unwrap());

    let report = [&["report"][..], &common, &["--methods", "OGD,AR2Econ", "--modes", "series"]].concat();
    assert!(regretcast(&report).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("summary.md")).unwrap());
}

#[test]
fn missing_output_directory_exits_with_2() {
    let o = regretcast(&["simulate", "--out", "/no/such/dir/anywhere"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/dir/anywhere"));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write_config(dir.path(), "[market]\nbidders = 3\n");
    assert_eq!(regretcast(&["simulate", "--config", &cfg, "--out", out]).status.code(), Some(2));
    assert_eq!(regretcast(&["run", "--methods", "XGBoost", "--out", out]).status.code(), Some(2));
    assert_eq!(regretcast(&["run", "--modes", "sideways", "--out", out]).status.code(), Some(2));
    assert_eq!(regretcast(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(regretcast(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_csv_row_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert!(regretcast(&["simulate", "--config", &cfg, "--out", out]).status.success());
    let path = dir.path().join("raw_log.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[3].split(',').collect();
    fields[1] = "oops";
    lines[3] = fields.join(",");
    std::fs::write(&path, lines.join("\n")).unwrap();
    let o = regretcast(&["prepare", "--config", &cfg, "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_without_manifest_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = regretcast(&["run", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn shift_flag_builds_shift_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write_config(
        dir.path(),
        "[market]\nn_bidders = 6\nauctions_per_hour = 20.0\nshift_scenario = \"day_night\"\nday_uplift = 0.4\n\
         [population]\nstep_fraction = { lo = 0.3, hi = 0.8 }\n",
    );
    assert!(regretcast(&["simulate", "--config", &cfg, "--out", out]).status.success());
    assert!(regretcast(&["prepare", "--config", &cfg, "--out", out, "--shift"]).status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["shift"], true);
    assert!(!manifest["shift_instances"].as_array().unwrap().is_empty());
}
