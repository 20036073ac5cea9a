//! The three pipeline stages: simulate, filter, report.

use std::fs;
use std::path::{Path, PathBuf};

use kalman_bench_core::estimate::StateEstimate;
use kalman_bench_core::linalg::{Matrix, Vector};
use kalman_bench_core::metrics::{fit_report, reduced_chi2};
use kalman_bench_core::scenarios::Scenario;
use kalman_bench_core::sim::{
    assumed_noise, run_filter, simulate, FilterConfig, FilterKind, TrajectoryRecord,
};
use kalman_bench_core::ukf::UtParams;

use crate::config::{
    config_hash, parse_filter_config, parse_run_config, write_filter_config, write_run_config,
    RunConfig,
};
use crate::csvio::{read_csv, write_csv, CsvTable};
use crate::error::CliError;

/// Output root: `KALMAN_BENCH_OUT` if set, else `./kalman_runs`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os("KALMAN_BENCH_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("kalman_runs"))
}

fn t_column(names: &[&str], prefix: &str) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(names.iter().map(|n| format!("{prefix}{n}")))
        .collect()
}

fn series_rows<'a>(
    times: &'a [f64],
    series: &'a [Vector],
) -> impl Iterator<Item = Vec<f64>> + 'a {
    times.iter().zip(series).map(|(t, v)| {
        std::iter::once(*t).chain(v.iter().copied()).collect()
    })
}

/// Simulates a run and writes `scenario.cfg`, `truth.csv`,
/// `truth_measurements.csv`, and `measurements.csv` into the run directory
/// (created if needed). Returns the run directory.
pub fn cmd_simulate(run: &RunConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => default_out_root().join(format!(
            "{}-seed{}",
            run.scenario.name(),
            run.sim.seed
        )),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let record = simulate(&run.scenario, &run.sim)?;
    let cfg_text = write_run_config(run);
    let cfg_path = dir.join("scenario.cfg");
    fs::write(&cfg_path, &cfg_text).map_err(|e| CliError::io(&cfg_path, e))?;

    let meta = [
        ("seed", run.sim.seed.to_string()),
        ("config_sha256", config_hash(&cfg_text)),
    ];
    let state_names = run.scenario.state_names();
    let meas_names = run.scenario.measurement_names();
    write_csv(
        &dir.join("truth.csv"),
        &meta,
        &t_column(&state_names, ""),
        series_rows(&record.times, &record.truth),
    )?;
    write_csv(
        &dir.join("truth_measurements.csv"),
        &meta,
        &t_column(&meas_names, ""),
        series_rows(&record.times, &record.truth_measurements),
    )?;
    write_csv(
        &dir.join("measurements.csv"),
        &meta,
        &t_column(&meas_names, ""),
        series_rows(&record.times, &record.measurements),
    )?;
    Ok(dir)
}

fn table_to_series(table: &CsvTable) -> (Vec<f64>, Vec<Vector>) {
    let times: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let series: Vec<Vector> = table.rows.iter().map(|r| Vector::from_slice(&r[1..])).collect();
    (times, series)
}

/// Loads the simulation artifacts of a run directory back into a record.
pub fn load_simulated(run_dir: &Path) -> Result<(RunConfig, TrajectoryRecord), CliError> {
    let cfg_path = run_dir.join("scenario.cfg");
    let cfg_text = fs::read_to_string(&cfg_path).map_err(|e| CliError::io(&cfg_path, e))?;
    let run = parse_run_config(&cfg_text)?;

    let truth = read_csv(&run_dir.join("truth.csv"))?;
    let clean = read_csv(&run_dir.join("truth_measurements.csv"))?;
    let meas = read_csv(&run_dir.join("measurements.csv"))?;
    let (times, truth_series) = table_to_series(&truth);
    let (_, clean_series) = table_to_series(&clean);
    let (_, meas_series) = table_to_series(&meas);
    let record = TrajectoryRecord {
        times,
        truth: truth_series,
        truth_measurements: clean_series,
        measurements: meas_series,
        ..TrajectoryRecord::default()
    };
    record.validate()?;
    Ok((run, record))
}

/// Runs a filter over a simulated run directory and writes `filter.cfg`,
/// `estimates.csv`, `residuals.csv`, and `covariance_diag.csv`.
pub fn cmd_filter(run_dir: &Path, fcfg: &FilterConfig) -> Result<(), CliError> {
    let (run, record) = load_simulated(run_dir)?;
    let out = run_filter(&run.scenario, &run.sim, &record, fcfg)?;

    let fcfg_text = write_filter_config(fcfg);
    let fcfg_path = run_dir.join("filter.cfg");
    fs::write(&fcfg_path, &fcfg_text).map_err(|e| CliError::io(&fcfg_path, e))?;

    let meta = [
        ("seed", run.sim.seed.to_string()),
        ("config_sha256", config_hash(&write_run_config(&run))),
        ("filter_sha256", config_hash(&fcfg_text)),
    ];
    let state_names = run.scenario.state_names();
    let meas_names = run.scenario.measurement_names();

    let means: Vec<Vector> = out.estimates.iter().map(|e| e.mean.clone()).collect();
    write_csv(
        &run_dir.join("estimates.csv"),
        &meta,
        &t_column(&state_names, ""),
        series_rows(&out.times, &means),
    )?;

    let mut resid_header: Vec<String> = vec!["t".into()];
    resid_header.extend(meas_names.iter().map(|n| format!("innov_{n}")));
    resid_header.extend(meas_names.iter().map(|n| format!("postfit_{n}")));
    write_csv(
        &run_dir.join("residuals.csv"),
        &meta,
        &resid_header,
        out.times.iter().enumerate().map(|(k, t)| {
            std::iter::once(*t)
                .chain(out.innovations[k].iter().copied())
                .chain(out.postfit_residuals[k].iter().copied())
                .collect()
        }),
    )?;

    let diags: Vec<Vector> = out
        .estimates
        .iter()
        .map(|e| Vector::new(e.cov.diag()))
        .collect();
    write_csv(
        &run_dir.join("covariance_diag.csv"),
        &meta,
        &t_column(&state_names, "p_"),
        series_rows(&out.times, &diags),
    )?;
    Ok(())
}

/// Loads a fully filtered run back into a record.
pub fn load_filtered(run_dir: &Path) -> Result<(RunConfig, FilterConfig, TrajectoryRecord), CliError> {
    let (run, mut record) = load_simulated(run_dir)?;
    let fcfg_path = run_dir.join("filter.cfg");
    let fcfg_text = fs::read_to_string(&fcfg_path).map_err(|e| CliError::io(&fcfg_path, e))?;
    let fcfg = parse_filter_config(&fcfg_text)?;

    let est = read_csv(&run_dir.join("estimates.csv"))?;
    let cov = read_csv(&run_dir.join("covariance_diag.csv"))?;
    let resid = read_csv(&run_dir.join("residuals.csv"))?;
    let k = run.scenario.measurement_dim();
    for (idx, row) in est.rows.iter().enumerate() {
        let mean = Vector::from_slice(&row[1..]);
        let diag = &cov.rows[idx][1..];
        let estimate = StateEstimate::new(mean, Matrix::from_diag(diag), (idx + 1) as u64, row[0])
            .map_err(|e| CliError::Config(format!("estimates.csv row {}: {e}", idx + 1)))?;
        record.estimates.push(estimate);
        let r = &resid.rows[idx];
        record.innovations.push(Vector::from_slice(&r[1..1 + k]));
        record.postfit_residuals.push(Vector::from_slice(&r[1 + k..1 + 2 * k]));
    }
    record.validate()?;
    Ok((run, fcfg, record))
}

/// Measurement sigmas used to normalise the chi-squared: the filter's
/// assumed levels.
fn report_sigmas(run: &RunConfig, fcfg: &FilterConfig) -> Vec<f64> {
    assumed_noise(&run.scenario, &run.sim.noise, fcfg).measurement
}

/// Writes `report.txt` and the plot-ready CSVs; optionally appends an
/// alpha/kappa sweep (each combination re-filters the stored measurements).
/// Returns the report text.
pub fn cmd_report(
    run_dir: &Path,
    sweep_alpha: &[f64],
    sweep_kappa: &[f64],
) -> Result<String, CliError> {
    let (run, fcfg, record) = load_filtered(run_dir)?;
    let sigmas = report_sigmas(&run, &fcfg);
    let report = fit_report(&record, &sigmas)?;

    let mut text = String::from("kalman-bench report\n\n[configuration]\n");
    let cfg_path = run_dir.join("scenario.cfg");
    text.push_str(&fs::read_to_string(&cfg_path).map_err(|e| CliError::io(&cfg_path, e))?);
    let fcfg_path = run_dir.join("filter.cfg");
    text.push_str(&fs::read_to_string(&fcfg_path).map_err(|e| CliError::io(&fcfg_path, e))?);

    text.push_str("\n[fit]\n");
    text.push_str(&format!("epochs = {}\n", record.epochs()));
    text.push_str(&format!("chi2 = {}\n", report.chi2));
    text.push_str(&format!("dof = {}\n", report.dof));
    text.push_str(&format!("reduced_chi2 = {}\n", report.reduced_chi2));
    for (name, rmse) in run.scenario.state_names().iter().zip(&report.rmse_per_component) {
        text.push_str(&format!("rmse_{name} = {rmse}\n"));
    }
    for (name, ratio) in run
        .scenario
        .measurement_names()
        .iter()
        .zip(&report.noise_reduction_ratio)
    {
        text.push_str(&format!("noise_reduction_{name} = {ratio}\n"));
    }
    for (name, rho) in run
        .scenario
        .measurement_names()
        .iter()
        .zip(&report.lag1_innovation)
    {
        text.push_str(&format!("lag1_innovation_{name} = {rho}\n"));
    }

    if !sweep_alpha.is_empty() {
        let kappas: Vec<f64> = if sweep_kappa.is_empty() { vec![fcfg.ut.kappa] } else { sweep_kappa.to_vec() };
        text.push_str("\n[sweep]\n");
        let mut values = Vec::new();
        for &alpha in sweep_alpha {
            for &kappa in &kappas {
                let mut swept = fcfg.clone();
                swept.ut = UtParams::new(alpha, fcfg.ut.beta, kappa)
                    .map_err(|e| CliError::Config(format!("sweep alpha {alpha}: {e}")))?;
                let out = run_filter(&run.scenario, &run.sim, &record, &swept)?;
                let (_, _, red) = reduced_chi2(&out.postfit_residuals, &sigmas)?;
                values.push(red);
                text.push_str(&format!("alpha={alpha} kappa={kappa} reduced_chi2 = {red}\n"));
            }
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        text.push_str(&format!("sweep_spread = {}\n", max - min));
    }

    let report_path = run_dir.join("report.txt");
    fs::write(&report_path, &text).map_err(|e| CliError::io(&report_path, e))?;

    let plotdir = run_dir.join("plotdata");
    fs::create_dir_all(&plotdir).map_err(|e| CliError::io(&plotdir, e))?;
    let meas_names = run.scenario.measurement_names();
    write_csv(
        &plotdir.join("residual_vs_time.csv"),
        &[],
        &t_column(&meas_names, "residual_"),
        series_rows(&record.times, &record.postfit_residuals),
    )?;
    let errors: Vec<Vector> = record
        .estimates
        .iter()
        .zip(&record.truth)
        .map(|(e, t)| e.mean.sub(t))
        .collect();
    write_csv(
        &plotdir.join("error_vs_time.csv"),
        &[],
        &t_column(&run.scenario.state_names(), "error_"),
        series_rows(&record.times, &errors),
    )?;
    Ok(text)
}

/// Convenience used by tests: run the whole pipeline in memory.
pub fn run_pipeline_in_memory(
    run: &RunConfig,
    fcfg: &FilterConfig,
) -> Result<TrajectoryRecord, CliError> {
    let record = simulate(&run.scenario, &run.sim)?;
    Ok(run_filter(&run.scenario, &run.sim, &record, fcfg)?)
}

/// Guard used by the CLI before dispatching a filter run.
pub fn check_compatibility(scenario: &Scenario, kind: FilterKind) -> Result<(), CliError> {
    let ok = matches!(
        (scenario, kind),
        (Scenario::FreeFall { params, .. }, FilterKind::Bkf) if params.mu == 0.0
    ) || matches!(
        (scenario, kind),
        (Scenario::FreeFall { .. }, FilterKind::Ekf | FilterKind::Ukf)
            | (Scenario::LotkaVolterra { .. }, FilterKind::Ekf | FilterKind::Ukf)
            | (Scenario::Reentry { .. }, FilterKind::Ukf)
    );
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "filter `{kind}` is not compatible with scenario `{}`",
            scenario.name()
        )))
    }
}
