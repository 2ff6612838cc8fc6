//! End-to-end checks of the binary: exit codes, output schemas, and
//! byte-level determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stencilflow"))
}

fn run_args(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

#[test]
fn run_emits_schema_v1_json_and_exits_zero() {
    let out = run_args(&[
        "run",
        "--method",
        "axpy",
        "--size",
        "32",
        "--iterations",
        "2",
        "--validate",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.starts_with(r#"{"schema":"v1","reports":["#),
        "got: {text}"
    );
    assert!(text.contains(r#""bit_exact":true"#));
}

#[test]
fn run_csv_has_header() {
    let out = run_args(&[
        "run",
        "--method",
        "matmul",
        "--size",
        "16",
        "--iterations",
        "1",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.starts_with("schema,method,size,iterations,scenario,"),
        "got: {text}"
    );
    assert_eq!(text.trim_end().lines().count(), 2);
}

#[test]
fn unknown_method_is_usage_error() {
    let out = run_args(&["run", "--method", "gpu", "--size", "8", "--iterations", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_machine_key_is_usage_error() {
    let dir = std::env::temp_dir();
    let path = dir.join("stencilflow_bad_machine.json");
    std::fs::write(&path, r#"{"coresss": 64}"#).unwrap();
    let out = run_args(&[
        "run",
        "--method",
        "axpy",
        "--size",
        "8",
        "--iterations",
        "1",
        "--machine",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn machine_overrides_apply() {
    let dir = std::env::temp_dir();
    let path = dir.join("stencilflow_machine_override.json");
    std::fs::write(&path, r#"{"init_time_s": 2.5}"#).unwrap();
    let out = run_args(&[
        "run",
        "--method",
        "axpy",
        "--size",
        "8",
        "--iterations",
        "0",
        "--model-only",
        "--machine",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains(r#""total_s":2.5"#));
}

#[test]
fn oversized_matmul_is_capacity_error() {
    let out = run_args(&[
        "run",
        "--method",
        "matmul",
        "--size",
        "16384",
        "--iterations",
        "1",
        "--model-only",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("DRAM"), "stderr: {err}");
}

#[test]
fn unwritable_out_is_io_error() {
    let out = run_args(&[
        "run",
        "--method",
        "axpy",
        "--size",
        "8",
        "--iterations",
        "1",
        "--out",
        "/nonexistent-dir/report.json",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [
        "run",
        "--method",
        "axpy",
        "--size",
        "33",
        "--iterations",
        "3",
        "--validate",
    ];
    let a = run_args(&args);
    let b = run_args(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn cpu_runs_identical_across_threads_after_masking_wall_clock() {
    let run_with = |threads: &str| {
        let out = run_args(&[
            "run",
            "--method",
            "cpu",
            "--size",
            "48",
            "--iterations",
            "4",
            "--validate",
            "--threads",
            threads,
        ]);
        assert_eq!(out.status.code(), Some(0));
        let mut v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        let report = &mut v["reports"][0];
        report["measured"] = serde_json::Value::Null;
        report["config"]["threads"] = serde_json::Value::Null;
        v.to_string()
    };
    assert_eq!(run_with("1"), run_with("8"));
}

#[test]
fn sweep_reports_ratios_and_skips_infeasible_configs() {
    let out = run_args(&[
        "sweep",
        "--methods",
        "cpu,axpy,matmul",
        "--sizes",
        "1024,16384",
        "--iters",
        "1000",
        "--scenarios",
        "pcie,uvm,upm",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["schema"], "v1");
    // matmul at 16384 exceeds device DRAM in every scenario.
    assert_eq!(v["failures"].as_array().unwrap().len(), 3);
    assert_eq!(v["reports"].as_array().unwrap().len(), 15);
    let ratios = v["ratios"].as_array().unwrap();
    assert!(!ratios.is_empty());
    for row in ratios {
        // The conversion-dominated matmul penalty only exists where layout
        // conversion is paid for, i.e. outside UPM.
        if row["size"] == 1024 && row["scenario"] == "pcie" {
            assert!(row["matmul_over_axpy_total"].as_f64().unwrap() > 10.0);
        }
    }
}

#[test]
fn validate_subcommand_passes() {
    let out = run_args(&["validate"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "got: {text}");
}

#[test]
fn calibrate_prints_anchor_table_and_writes_machine() {
    let dir = std::env::temp_dir();
    let path: PathBuf = dir.join("stencilflow_fitted_machine.json");
    let _ = std::fs::remove_file(&path);
    let out = run_args(&["calibrate", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("kernel-time anchors"));
    let text = std::fs::read_to_string(&path).unwrap();
    let fitted: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(
        fitted["cpu_stencil_throughput_updates_per_s"]
            .as_f64()
            .unwrap()
            > 0.0
    );
}
