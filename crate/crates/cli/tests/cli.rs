//! Integration tests for the command-line pipeline: artifact layout,
//! bit-exact round-trips, compatibility guards, and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kalman_bench::commands::{cmd_filter, cmd_simulate, run_pipeline_in_memory};
use kalman_bench::config::{scenario_from_name, RunConfig};
use kalman_bench::csvio::read_csv;
use kalman_bench_core::sim::{FilterConfig, FilterKind};

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!(
            "kalman_bench_test_{tag}_{}",
            std::process::id()
        ));
        fs::remove_dir_all(&dir).ok();
        fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }

    fn path(&self) -> &Path {
        &self.0
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        fs::remove_dir_all(&self.0).ok();
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kalman-bench"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("failed to spawn kalman-bench");
    assert!(
        out.status.success(),
        "command failed: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn simulate_freefall_writes_1000_measurements() {
    let tmp = TempDir::new("sim_freefall");
    let dir = tmp.path().join("run");
    run_ok(bin()
        .args(["simulate", "--scenario", "freefall", "--seed", "1"])
        .arg("--out")
        .arg(&dir));
    let table = read_csv(&dir.join("measurements.csv")).unwrap();
    assert_eq!(table.rows.len(), 1000);
    assert_eq!(table.header, vec!["t", "x", "v"]);
    assert!(table.metadata.iter().any(|(k, v)| k == "seed" && v == "1"));
    assert!(table.metadata.iter().any(|(k, _)| k == "config_sha256"));
}

#[test]
fn simulate_reentry_covers_200_seconds() {
    let tmp = TempDir::new("sim_reentry");
    let dir = tmp.path().join("run");
    run_ok(bin()
        .args(["simulate", "--scenario", "reentry", "--duration", "200", "--seed", "2"])
        .arg("--out")
        .arg(&dir));
    let table = read_csv(&dir.join("measurements.csv")).unwrap();
    assert_eq!(table.rows.len(), 2000);
    assert_eq!(table.header, vec!["t", "d", "theta"]);
}

#[test]
fn zero_noise_measurements_equal_truth_projection() {
    let tmp = TempDir::new("zero_noise");
    let dir = tmp.path().join("run");
    run_ok(bin()
        .args(["simulate", "--scenario", "freefall", "--zero-noise", "--seed", "3"])
        .arg("--out")
        .arg(&dir));
    let meas = read_csv(&dir.join("measurements.csv")).unwrap();
    let clean = read_csv(&dir.join("truth_measurements.csv")).unwrap();
    for (m, c) in meas.rows.iter().zip(&clean.rows) {
        for (a, b) in m.iter().zip(c) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn file_roundtrip_matches_in_memory_pipeline_bit_for_bit() {
    let tmp = TempDir::new("roundtrip");
    let run = RunConfig::new(scenario_from_name("freefall").unwrap(), 3);
    let fcfg = FilterConfig::new(FilterKind::Bkf);

    let in_memory = run_pipeline_in_memory(&run, &fcfg).unwrap();

    let dir = cmd_simulate(&run, Some(&tmp.path().join("run"))).unwrap();
    cmd_filter(&dir, &fcfg).unwrap();
    let est = read_csv(&dir.join("estimates.csv")).unwrap();
    let resid = read_csv(&dir.join("residuals.csv")).unwrap();

    assert_eq!(est.rows.len(), in_memory.estimates.len());
    for (row, mem) in est.rows.iter().zip(&in_memory.estimates) {
        for (got, want) in row[1..].iter().zip(mem.mean.iter()) {
            assert_eq!(got.to_bits(), want.to_bits(), "estimate bits differ");
        }
    }
    for (row, (innov, postfit)) in resid
        .rows
        .iter()
        .zip(in_memory.innovations.iter().zip(&in_memory.postfit_residuals))
    {
        for (got, want) in row[1..3].iter().zip(innov.iter()) {
            assert_eq!(got.to_bits(), want.to_bits(), "innovation bits differ");
        }
        for (got, want) in row[3..5].iter().zip(postfit.iter()) {
            assert_eq!(got.to_bits(), want.to_bits(), "post-fit bits differ");
        }
    }
}

#[test]
fn reentry_file_roundtrip_is_bit_exact_too() {
    // exercises the vector-valued config keys (initial state, noise
    // diagonals) on the heaviest float path
    let tmp = TempDir::new("roundtrip_reentry");
    let mut run = RunConfig::new(scenario_from_name("reentry").unwrap(), 12);
    run.sim.duration = 5.0;
    let fcfg = FilterConfig::new(FilterKind::Ukf);

    let in_memory = run_pipeline_in_memory(&run, &fcfg).unwrap();
    let dir = cmd_simulate(&run, Some(&tmp.path().join("run"))).unwrap();
    cmd_filter(&dir, &fcfg).unwrap();
    let est = read_csv(&dir.join("estimates.csv")).unwrap();
    assert_eq!(est.rows.len(), 50);
    for (row, mem) in est.rows.iter().zip(&in_memory.estimates) {
        for (got, want) in row[1..].iter().zip(mem.mean.iter()) {
            assert_eq!(got.to_bits(), want.to_bits(), "estimate bits differ");
        }
    }
}

#[test]
fn freefall_drag_pipeline_runs_through_ukf() {
    let tmp = TempDir::new("drag_cli");
    let dir = tmp.path().join("run");
    run_ok(bin()
        .args(["simulate", "--scenario", "freefall_drag", "--mu", "0.2", "--seed", "13"])
        .arg("--out")
        .arg(&dir));
    let cfg = fs::read_to_string(dir.join("scenario.cfg")).unwrap();
    assert!(cfg.contains("mu = 0.2"), "{cfg}");
    run_ok(bin().args(["filter", "--filter", "ukf", "--run-dir"]).arg(&dir));
    let out = run_ok(bin().args(["report", "--run-dir"]).arg(&dir));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("reduced_chi2 = "));
}

#[test]
fn reentry_rejects_bkf_with_single_line_error() {
    let tmp = TempDir::new("guard");
    let dir = tmp.path().join("run");
    run_ok(bin()
        .args(["simulate", "--scenario", "reentry", "--duration", "1", "--seed", "4"])
        .arg("--out")
        .arg(&dir));
    let out = bin()
        .args(["filter", "--filter", "bkf", "--run-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.trim().lines().count(), 1, "stderr: {stderr}");
    assert!(stderr.starts_with("error:"), "stderr: {stderr}");
    assert!(stderr.contains("bkf"), "stderr: {stderr}");
}

#[test]
fn lotka_volterra_ekf_filters_1000_epochs() {
    let tmp = TempDir::new("lv_ekf");
    let dir = tmp.path().join("run");
    run_ok(bin()
        .args(["simulate", "--scenario", "lotka_volterra", "--seed", "5"])
        .arg("--out")
        .arg(&dir));
    run_ok(bin().args(["filter", "--filter", "ekf", "--run-dir"]).arg(&dir));
    let est = read_csv(&dir.join("estimates.csv")).unwrap();
    assert_eq!(est.rows.len(), 1000);
    assert!(est.rows.iter().all(|r| r.iter().all(|v| v.is_finite())));
    // residual std must come out below the raw sigma = 1.0
    let resid = read_csv(&dir.join("residuals.csv")).unwrap();
    let postfit: Vec<f64> = resid.rows.iter().map(|r| r[3]).collect();
    let mean = postfit.iter().sum::<f64>() / postfit.len() as f64;
    let var = postfit.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
        / (postfit.len() - 1) as f64;
    assert!(var.sqrt() < 1.0, "post-fit residual std {}", var.sqrt());
}

#[test]
fn report_contains_reduced_chi2_and_plotdata() {
    let tmp = TempDir::new("report");
    let dir = tmp.path().join("run");
    run_ok(bin()
        .args(["simulate", "--scenario", "freefall", "--seed", "6"])
        .arg("--out")
        .arg(&dir));
    run_ok(bin().args(["filter", "--filter", "bkf", "--run-dir"]).arg(&dir));
    let out = run_ok(bin().args(["report", "--run-dir"]).arg(&dir));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("reduced_chi2 = "), "stdout: {stdout}");
    let report = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("reduced_chi2 = "));
    assert!(report.contains("noise_reduction_x"));
    assert!(report.contains("scenario = freefall"));
    assert!(dir.join("plotdata/residual_vs_time.csv").exists());
    assert!(dir.join("plotdata/error_vs_time.csv").exists());
}

#[test]
fn zero_noise_report_has_zero_chi2() {
    let tmp = TempDir::new("zero_chi2");
    let dir = tmp.path().join("run");
    run_ok(bin()
        .args(["simulate", "--scenario", "freefall", "--zero-noise", "--seed", "7"])
        .arg("--out")
        .arg(&dir));
    run_ok(bin().args(["filter", "--filter", "bkf", "--run-dir"]).arg(&dir));
    let report = run_ok(bin().args(["report", "--run-dir"]).arg(&dir));
    let text = String::from_utf8_lossy(&report.stdout);
    let chi2_line = text
        .lines()
        .find(|l| l.starts_with("reduced_chi2 = "))
        .expect("report must state reduced_chi2");
    let value: f64 = chi2_line.trim_start_matches("reduced_chi2 = ").parse().unwrap();
    assert!(value < 1e-12, "zero-noise reduced chi2 = {value}");
}

#[test]
fn sweep_alpha_produces_table() {
    let tmp = TempDir::new("sweep");
    let dir = tmp.path().join("run");
    run_ok(bin()
        .args(["simulate", "--scenario", "reentry", "--duration", "20", "--seed", "8"])
        .arg("--out")
        .arg(&dir));
    run_ok(bin().args(["filter", "--filter", "ukf", "--run-dir"]).arg(&dir));
    let out = run_ok(bin()
        .args(["report", "--sweep-alpha", "1e-3,0.5", "--sweep-kappa", "-2,0", "--run-dir"])
        .arg(&dir));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.matches("reduced_chi2 = ").count(), 5, "{text}");
    assert!(text.contains("sweep_spread = "));
    assert!(text.contains("alpha=0.001 kappa=-2"));
}

#[test]
fn malformed_csv_reports_line_number() {
    let tmp = TempDir::new("bad_csv");
    let dir = tmp.path().join("run");
    run_ok(bin()
        .args(["simulate", "--scenario", "freefall", "--seed", "9"])
        .arg("--out")
        .arg(&dir));
    // corrupt the first data row (line 4: two metadata lines + header)
    let path = dir.join("measurements.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = lines[3].replacen(',', ",oops", 1);
    fs::write(&path, lines.join("\n")).unwrap();
    let out = bin()
        .args(["filter", "--filter", "bkf", "--run-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("measurements.csv:4"), "stderr: {stderr}");
}

#[test]
fn unknown_scenario_param_key_is_rejected() {
    let tmp = TempDir::new("params_file");
    let params = tmp.path().join("params.cfg");
    fs::write(&params, "x0 = 25\nv0 = -1\n").unwrap();
    let dir = tmp.path().join("run");
    run_ok(bin()
        .args(["simulate", "--scenario", "freefall", "--seed", "10"])
        .arg("--params")
        .arg(&params)
        .arg("--out")
        .arg(&dir));
    let truth = read_csv(&dir.join("truth.csv")).unwrap();
    // the configured release point shows up in the first truth row
    assert!((truth.rows[0][1] - 25.0).abs() < 0.1);

    fs::write(&params, "x0 = 25\nheight = 3\n").unwrap();
    let out = bin()
        .args(["simulate", "--scenario", "freefall", "--seed", "10"])
        .arg("--params")
        .arg(&params)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("height"));
}

#[test]
fn out_root_falls_back_to_env_var() {
    let tmp = TempDir::new("env_root");
    let out = bin()
        .env("KALMAN_BENCH_OUT", tmp.path())
        .args(["simulate", "--scenario", "freefall", "--seed", "11"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let printed = String::from_utf8_lossy(&out.stdout);
    assert!(printed.trim().ends_with("freefall-seed11"), "stdout: {printed}");
    assert!(tmp.path().join("freefall-seed11/measurements.csv").exists());
}
