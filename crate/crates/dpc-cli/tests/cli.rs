//! End-to-end tests of the `dpc` binary: exit codes, file contracts, and
//! output formats, using small scenarios written into temp directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dpc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpc"))
}

fn run(args: &[&str]) -> Output {
    dpc().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// A fast scenario: 200 samples at 1 MHz with a live scrambler.
fn tiny_scenario(stages: usize) -> String {
    let mut text = String::new();
    for i in 0..stages {
        let axis = if i % 2 == 0 { "S1" } else { "S3" };
        text.push_str(&format!(
            "[[chain]]\naxis = \"{axis}\"\ngain = 3.141592653589793\n\n"
        ));
    }
    text.push_str(
        "[scrambler]\n\
         drift_rate_rad_s = 1e4\n\
         perturb_sigma = 1e-3\n\
         seed = 5\n\n\
         [loop]\n\
         sample_rate_hz = 1e6\n\
         activation_time_s = 1e-5\n\
         duration_s = 2e-4\n\
         target_sop = [0.0, 0.6, 0.8]\n\n\
         [solver]\n\
         method = \"gradient_projection\"\n",
    );
    text
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_writes_the_expected_header_for_three_and_four_stages() {
    let dir = tempfile::tempdir().unwrap();
    for (m, header) in [
        (3, "t,s1,s2,s3,err,phi_1,phi_2,phi_3,ns_active,sigma2"),
        (4, "t,s1,s2,s3,err,phi_1,phi_2,phi_3,phi_4,ns_active,sigma2"),
    ] {
        let scenario = write_scenario(dir.path(), "s.toml", &tiny_scenario(m));
        let out = dir.path().join(format!("trace_{m}.csv"));
        let result = run(&[
            "simulate",
            scenario.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));
        let text = fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().next().unwrap(), header);
        // 200 samples at the default decimation of 100 → 2 rows.
        assert_eq!(text.lines().count(), 3);
        // The summary block carries every stable key.
        let summary = stdout(&result);
        for key in [
            "convergence_time_s = ",
            "steady_state_error = ",
            "max_abs_phi = ",
            "nullspace_duty = ",
            "bounded_fraction_1_5 = ",
            "control_steps = ",
            "solver_failures = ",
        ] {
            assert!(summary.contains(key), "missing {key:?} in {summary:?}");
        }
    }
}

#[test]
fn simulate_honors_an_explicit_decimation() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.toml", &tiny_scenario(3));
    let out = dir.path().join("trace.csv");
    let result = run(&[
        "simulate",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--decimation",
        "7",
    ]);
    assert_eq!(code(&result), 0);
    let rows = fs::read_to_string(&out).unwrap().lines().count() - 1;
    assert_eq!(rows, 200usize.div_ceil(7));
}

#[test]
fn a_zero_decimation_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.toml", &tiny_scenario(3));
    let out = dir.path().join("trace.csv");
    let result = run(&[
        "simulate",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--decimation",
        "0",
    ]);
    assert_eq!(code(&result), 2);
    assert!(!out.exists());
}

#[test]
fn an_unknown_scenario_key_exits_two_with_a_line_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let text = tiny_scenario(3) + "bogus_knob = 1\n";
    let scenario = write_scenario(dir.path(), "s.toml", &text);
    let out = dir.path().join("trace.csv");
    let result = run(&[
        "simulate",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 2);
    let message = stderr(&result);
    assert!(message.contains("invalid configuration"), "got {message:?}");
    // The TOML diagnostic names the offending line.
    assert!(message.contains("bogus_knob"), "got {message:?}");
    assert!(!out.exists(), "no partial CSV on a config error");
}

#[test]
fn a_degenerate_target_exits_two_and_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let text = tiny_scenario(3).replace("[0.0, 0.6, 0.8]", "[0.0, 0.0, 0.0]");
    let scenario = write_scenario(dir.path(), "s.toml", &text);
    let out = dir.path().join("trace.csv");
    let result = run(&[
        "simulate",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("invalid configuration"));
    assert!(!out.exists(), "no partial CSV on a config error");
}

#[test]
fn a_missing_output_directory_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.toml", &tiny_scenario(3));
    let out = dir.path().join("no_such_dir").join("trace.csv");
    let result = run(&[
        "simulate",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 3);
    assert!(stderr(&result).contains("i/o error"));
}

#[test]
fn a_missing_scenario_file_exits_three() {
    let result = run(&["simulate", "/no/such/scenario.toml", "--out", "/tmp/x.csv"]);
    assert_eq!(code(&result), 3);
}

#[test]
fn identical_runs_produce_byte_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.toml", &tiny_scenario(4));
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let result = run(&[
            "simulate",
            scenario.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--decimation",
            "1",
        ]);
        assert_eq!(code(&result), 0);
    }
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());
}

#[test]
fn check_jacobian_passes_on_a_healthy_chain_and_reports_deviations() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.toml", &tiny_scenario(4));
    let result = run(&[
        "check-jacobian",
        scenario.to_str().unwrap(),
        "--trials",
        "50",
    ]);
    assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));
    let report = stdout(&result);
    for key in [
        "trials = 50",
        "stages = 4",
        "max_fd_relative_error = ",
        "max_output_dot = ",
        "max_sigma3_relative = ",
        "max_manipulability = ",
        "max_minor_norm = ",
        "status = ok",
    ] {
        assert!(report.contains(key), "missing {key:?} in {report:?}");
    }
}

#[test]
fn zero_trials_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.toml", &tiny_scenario(3));
    let result = run(&[
        "check-jacobian",
        scenario.to_str().unwrap(),
        "--trials",
        "0",
    ]);
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("usage"));
}

#[test]
fn sweep_writes_one_trace_per_value_plus_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.toml", &tiny_scenario(4));
    let out_dir = dir.path().join("sweep");
    let result = run(&[
        "sweep",
        scenario.to_str().unwrap(),
        "--param",
        "mu=0.05,0.2",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "stderr: {}", stderr(&result));
    assert!(out_dir.join("mu_0.05.csv").exists());
    assert!(out_dir.join("mu_0.2.csv").exists());
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(
        lines[0],
        "key,value,convergence_time_s,steady_state_error,max_abs_phi,nullspace_duty,bounded_fraction_1_5,solver_failures"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("mu,0.05,"));
    assert!(lines[2].starts_with("mu,0.2,"));
    // The same table lands on stdout, rows in input order.
    assert_eq!(stdout(&result), summary);
}

#[test]
fn sweep_rejects_unknown_keys_and_empty_value_lists() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.toml", &tiny_scenario(3));
    let out_dir = dir.path().join("sweep");
    for param in ["bogus=1,2", "mu=", "mu"] {
        let result = run(&[
            "sweep",
            scenario.to_str().unwrap(),
            "--param",
            param,
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&result), 2, "param {param:?}");
        assert!(!out_dir.exists(), "param {param:?} must not create outputs");
    }
}

#[test]
fn sweep_skips_all_output_when_any_value_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.toml", &tiny_scenario(3));
    let out_dir = dir.path().join("sweep");
    // mu = 2 fails validation (must lie in (0, 1)); the good first value
    // must not leave a trace behind.
    let result = run(&[
        "sweep",
        scenario.to_str().unwrap(),
        "--param",
        "mu=0.1,2.0",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 2);
    assert!(!out_dir.exists());
}

#[test]
fn usage_parse_failures_exit_two() {
    // Missing required --out.
    let result = run(&["simulate", "whatever.toml"]);
    assert_eq!(code(&result), 2);
    // Unknown subcommand.
    let result = run(&["frobnicate"]);
    assert_eq!(code(&result), 2);
}
