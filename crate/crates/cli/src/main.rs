use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kalman_bench::commands::{check_compatibility, cmd_filter, cmd_report, cmd_simulate};
use kalman_bench::config::{
    parse_filter_kind, parse_observe, parse_pairing, scenario_from_name, split_floats, RunConfig,
};
use kalman_bench::error::CliError;
use kalman_bench_core::linalg::Vector;
use kalman_bench_core::scenarios::{parse_kv, NoiseSpec, Scenario};
use kalman_bench_core::sim::FilterConfig;
use kalman_bench_core::ukf::UtParams;

/// Kalman filter benchmark harness: simulate a scenario, filter the
/// measurements, and report fit statistics as plot-ready CSV files.
#[derive(Parser)]
#[command(name = "kalman-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground truth and noisy measurements for a scenario.
    Simulate(SimulateArgs),
    /// Run a filter over a simulated run directory.
    Filter(FilterArgs),
    /// Summarise a filtered run and emit plot data.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// freefall | freefall_drag | lotka_volterra | reentry
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Measurement period in seconds (scenario default if omitted).
    #[arg(long)]
    dt: Option<f64>,
    /// Run length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Inner RK4 steps per measurement epoch.
    #[arg(long)]
    inner_substeps: Option<usize>,
    /// Free fall observation mode: full | height_only.
    #[arg(long)]
    observe: Option<String>,
    /// Viscous drag rate for the free-fall scenarios (1/s).
    #[arg(long)]
    mu: Option<f64>,
    /// Disable all injected noise.
    #[arg(long)]
    zero_noise: bool,
    /// Comma-separated process noise overrides (see README for units).
    #[arg(long)]
    process_noise: Option<String>,
    /// Comma-separated measurement noise sigmas.
    #[arg(long)]
    measurement_noise: Option<String>,
    /// Scenario parameter file (flat `name = value` lines).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Run directory (default: $KALMAN_BENCH_OUT/<scenario>-seed<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    run_dir: PathBuf,
    /// bkf | ekf | ukf
    #[arg(long)]
    filter: String,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    /// UKF cross-covariance pairing: regenerated | mixed | reused.
    #[arg(long)]
    pairing: Option<String>,
    /// Initial state estimate override (comma-separated).
    #[arg(long, allow_hyphen_values = true)]
    init_state: Option<String>,
    /// Initial covariance diagonal override (comma-separated).
    #[arg(long)]
    init_cov_diag: Option<String>,
    /// Filter-side RK4 substeps per epoch.
    #[arg(long)]
    filter_substeps: Option<usize>,
    /// Filter-assumed process noise override.
    #[arg(long, allow_hyphen_values = true)]
    filter_process: Option<String>,
    /// Filter-assumed measurement sigmas override.
    #[arg(long, allow_hyphen_values = true)]
    filter_measurement: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run_dir: PathBuf,
    /// Re-filter with each of these alpha values and tabulate reduced chi2.
    #[arg(long)]
    sweep_alpha: Option<String>,
    /// Kappa values for the sweep (defaults to the run's kappa).
    #[arg(long, allow_hyphen_values = true)]
    sweep_kappa: Option<String>,
}

fn build_run_config(args: &SimulateArgs) -> Result<RunConfig, CliError> {
    let mut scenario = scenario_from_name(&args.scenario)?;
    if let Some(path) = &args.params {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let entries = parse_kv(&text)?;
        match &mut scenario {
            Scenario::FreeFall { params, .. } => params.apply_kv(&entries)?,
            Scenario::LotkaVolterra { params } => params.apply_kv(&entries)?,
            Scenario::Reentry { params, .. } => params.apply_kv(&entries)?,
        }
    }
    if let Some(mode) = &args.observe {
        match &mut scenario {
            Scenario::FreeFall { observe, .. } => *observe = parse_observe(mode)?,
            _ => return Err(CliError::Config("--observe only applies to free fall".into())),
        }
    }
    if let Some(mu) = args.mu {
        match &mut scenario {
            Scenario::FreeFall { params, .. } => params.mu = mu,
            _ => return Err(CliError::Config("--mu only applies to free fall".into())),
        }
    }
    let mut run = RunConfig::new(scenario, args.seed);
    if let Some(dt) = args.dt {
        run.sim.dt = dt;
    }
    if let Some(duration) = args.duration {
        run.sim.duration = duration;
    }
    if let Some(substeps) = args.inner_substeps {
        run.sim.inner_substeps = substeps;
    }
    if args.zero_noise {
        run.sim.noise = NoiseSpec::zero(
            run.sim.noise.process.len(),
            run.sim.noise.measurement.len(),
        );
    }
    if let Some(list) = &args.process_noise {
        run.sim.noise.process = split_floats(list, "process-noise")?;
    }
    if let Some(list) = &args.measurement_noise {
        run.sim.noise.measurement = split_floats(list, "measurement-noise")?;
    }
    Ok(run)
}

fn build_filter_config(args: &FilterArgs) -> Result<FilterConfig, CliError> {
    let mut fcfg = FilterConfig::new(parse_filter_kind(&args.filter)?);
    let alpha = args.alpha.unwrap_or(fcfg.ut.alpha);
    let beta = args.beta.unwrap_or(fcfg.ut.beta);
    let kappa = args.kappa.unwrap_or(fcfg.ut.kappa);
    fcfg.ut = UtParams::new(alpha, beta, kappa)
        .map_err(|e| CliError::Config(format!("invalid UT parameters: {e}")))?;
    if let Some(p) = &args.pairing {
        fcfg.pairing = parse_pairing(p)?;
    }
    if let Some(list) = &args.init_state {
        fcfg.init_mean = Some(Vector::new(split_floats(list, "init-state")?));
    }
    if let Some(list) = &args.init_cov_diag {
        fcfg.init_cov_diag = Some(split_floats(list, "init-cov-diag")?);
    }
    fcfg.substeps = args.filter_substeps;
    if let Some(list) = &args.filter_process {
        fcfg.process_noise = Some(split_floats(list, "filter-process")?);
    }
    if let Some(list) = &args.filter_measurement {
        fcfg.measurement_noise = Some(split_floats(list, "filter-measurement")?);
    }
    Ok(fcfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let run = build_run_config(&args)?;
            let dir = cmd_simulate(&run, args.out.as_deref())?;
            println!("{}", dir.display());
        }
        Command::Filter(args) => {
            let fcfg = build_filter_config(&args)?;
            let (run, _) = kalman_bench::commands::load_simulated(&args.run_dir)?;
            check_compatibility(&run.scenario, fcfg.kind)?;
            cmd_filter(&args.run_dir, &fcfg)?;
            println!("{}", args.run_dir.join("estimates.csv").display());
        }
        Command::Report(args) => {
            let sweep_alpha = match &args.sweep_alpha {
                Some(list) => split_floats(list, "sweep-alpha")?,
                None => Vec::new(),
            };
            let sweep_kappa = match &args.sweep_kappa {
                Some(list) => split_floats(list, "sweep-kappa")?,
                None => Vec::new(),
            };
            let text = cmd_report(&args.run_dir, &sweep_alpha, &sweep_kappa)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
