//! Run and filter configuration: construction from CLI flags, round-trip
//! through the flat `name = value` files dropped into each run directory,
//! and the config hash recorded in CSV metadata.

use sha2::{Digest, Sha256};

use kalman_bench_core::linalg::{Matrix, Vector};
use kalman_bench_core::scenarios::{
    parse_kv, FreeFallParams, KvEntry, LvParams, ObserveMode, ReentryInit,
    ReentryParams, Scenario, ScenarioError,
};
use kalman_bench_core::sim::{FilterConfig, FilterKind, SimConfig};
use kalman_bench_core::ukf::{CrossCovPairing, UtParams};

use crate::error::CliError;

/// Everything a simulation run needs; serialised as `scenario.cfg`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub sim: SimConfig,
}

impl RunConfig {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        let sim = SimConfig::defaults_for(&scenario, seed);
        RunConfig { scenario, sim }
    }
}

pub fn scenario_from_name(name: &str) -> Result<Scenario, CliError> {
    match name {
        "freefall" => Ok(Scenario::FreeFall {
            params: FreeFallParams::default(),
            observe: ObserveMode::Full,
        }),
        "freefall_drag" => Ok(Scenario::FreeFall {
            params: FreeFallParams { mu: 0.1, ..FreeFallParams::default() },
            observe: ObserveMode::Full,
        }),
        "lotka_volterra" => Ok(Scenario::LotkaVolterra { params: LvParams::default() }),
        "reentry" => Ok(Scenario::Reentry {
            params: ReentryParams::default(),
            init: ReentryInit::default(),
        }),
        other => Err(CliError::Config(format!(
            "unknown scenario `{other}` (expected freefall, freefall_drag, lotka_volterra, reentry)"
        ))),
    }
}

fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

pub fn split_floats(text: &str, key: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("`{key}`: `{}` is not a number", f.trim())))
        })
        .collect()
}

/// Renders `scenario.cfg`: the full run configuration, bit-exactly
/// reproducible (floats use round-trip formatting).
pub fn write_run_config(run: &RunConfig) -> String {
    let mut out = String::from("# kalman-bench run configuration\n");
    let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    kv("scenario", run.scenario.name().to_string());
    kv("seed", run.sim.seed.to_string());
    kv("dt", format!("{}", run.sim.dt));
    kv("duration", format!("{}", run.sim.duration));
    kv("inner_substeps", run.sim.inner_substeps.to_string());
    kv("process_noise", join_floats(&run.sim.noise.process));
    kv("measurement_noise", join_floats(&run.sim.noise.measurement));
    match &run.scenario {
        Scenario::FreeFall { params, observe } => {
            kv(
                "observe",
                match observe {
                    ObserveMode::Full => "full".into(),
                    ObserveMode::HeightOnly => "height_only".into(),
                },
            );
            kv("x0", format!("{}", params.x0));
            kv("v0", format!("{}", params.v0));
            kv("g", format!("{}", params.g));
            kv("mu", format!("{}", params.mu));
        }
        Scenario::LotkaVolterra { params } => {
            kv("alpha", format!("{}", params.alpha));
            kv("beta", format!("{}", params.beta));
            kv("gamma", format!("{}", params.gamma));
            kv("delta", format!("{}", params.delta));
            kv("x0", format!("{}", params.x0));
            kv("y0", format!("{}", params.y0));
        }
        Scenario::Reentry { params, init } => {
            kv("gamma0", format!("{}", params.gamma0));
            kv("r_c", format!("{}", params.r_c));
            kv("g_n", format!("{}", params.g_n));
            kv("m", format!("{}", params.mass));
            kv("earth_radius", format!("{}", params.earth_radius));
            kv("radar_x1", format!("{}", params.radar.0));
            kv("radar_x2", format!("{}", params.radar.1));
            kv("sample_rate", format!("{}", params.sample_rate));
            kv("meas_sigma_d", format!("{}", params.meas_sigma_d));
            kv("meas_sigma_theta", format!("{}", params.meas_sigma_theta));
            kv("x0_true", join_floats(init.x0_true.as_slice()));
            kv("q_sim", join_floats(&init.q_sim.diag()));
            kv("q_filter", join_floats(&init.q_filter.diag()));
        }
    }
    out
}

/// Parses `scenario.cfg` back into a [`RunConfig`]; unknown keys are
/// rejected with their line number.
pub fn parse_run_config(text: &str) -> Result<RunConfig, CliError> {
    let entries = parse_kv(text)?;
    let name = entries
        .iter()
        .find(|e| e.key == "scenario")
        .ok_or_else(|| CliError::Config("scenario.cfg is missing the `scenario` key".into()))?
        .value
        .clone();
    let scenario = scenario_from_name(&name)?;
    let mut sim = SimConfig::defaults_for(&scenario, 0);

    // scenario-level pieces collected while walking the entries
    let mut ff = match &scenario {
        Scenario::FreeFall { params, .. } => Some((*params, ObserveMode::Full)),
        _ => None,
    };
    let mut lv = match &scenario {
        Scenario::LotkaVolterra { params } => Some(*params),
        _ => None,
    };
    let mut reentry = match &scenario {
        Scenario::Reentry { params, init } => Some((params.clone(), init.clone())),
        _ => None,
    };
    let mut scenario_entries: Vec<KvEntry> = Vec::new();

    for e in &entries {
        match e.key.as_str() {
            "scenario" => {}
            "seed" => {
                sim.seed = e.value.parse().map_err(|_| {
                    CliError::Config(format!("`seed`: `{}` is not an integer", e.value))
                })?;
            }
            "dt" => sim.dt = parse_float(e)?,
            "duration" => sim.duration = parse_float(e)?,
            "inner_substeps" => {
                sim.inner_substeps = e.value.parse().map_err(|_| {
                    CliError::Config(format!("`inner_substeps`: `{}` is not an integer", e.value))
                })?;
            }
            "process_noise" => sim.noise.process = split_floats(&e.value, "process_noise")?,
            "measurement_noise" => {
                sim.noise.measurement = split_floats(&e.value, "measurement_noise")?
            }
            "observe" => {
                let mode = parse_observe(&e.value)?;
                if let Some((_, obs)) = ff.as_mut() {
                    *obs = mode;
                } else {
                    return Err(unknown_key(e));
                }
            }
            "x0_true" => {
                if let Some((_, init)) = reentry.as_mut() {
                    init.x0_true = Vector::new(split_floats(&e.value, "x0_true")?);
                } else {
                    return Err(unknown_key(e));
                }
            }
            "q_sim" => {
                if let Some((_, init)) = reentry.as_mut() {
                    init.q_sim = Matrix::from_diag(&split_floats(&e.value, "q_sim")?);
                } else {
                    return Err(unknown_key(e));
                }
            }
            "q_filter" => {
                if let Some((_, init)) = reentry.as_mut() {
                    init.q_filter = Matrix::from_diag(&split_floats(&e.value, "q_filter")?);
                } else {
                    return Err(unknown_key(e));
                }
            }
            _ => scenario_entries.push(e.clone()),
        }
    }

    let scenario = if let Some((mut params, observe)) = ff {
        params.apply_kv(&scenario_entries)?;
        Scenario::FreeFall { params, observe }
    } else if let Some(mut params) = lv.take() {
        params.apply_kv(&scenario_entries)?;
        Scenario::LotkaVolterra { params }
    } else if let Some((mut params, init)) = reentry.take() {
        params.apply_kv(&scenario_entries)?;
        Scenario::Reentry { params, init }
    } else {
        unreachable!("scenario was constructed above")
    };
    Ok(RunConfig { scenario, sim })
}

fn parse_float(e: &KvEntry) -> Result<f64, CliError> {
    e.value
        .parse::<f64>()
        .map_err(|_| CliError::Config(format!("`{}`: `{}` is not a number", e.key, e.value)))
}

fn unknown_key(e: &KvEntry) -> CliError {
    CliError::Scenario(ScenarioError::UnknownKey { line: e.line, key: e.key.clone() })
}

pub fn parse_observe(text: &str) -> Result<ObserveMode, CliError> {
    match text {
        "full" => Ok(ObserveMode::Full),
        "height_only" | "height-only" => Ok(ObserveMode::HeightOnly),
        other => Err(CliError::Config(format!(
            "unknown observe mode `{other}` (expected full or height_only)"
        ))),
    }
}

pub fn parse_filter_kind(text: &str) -> Result<FilterKind, CliError> {
    match text {
        "bkf" => Ok(FilterKind::Bkf),
        "ekf" => Ok(FilterKind::Ekf),
        "ukf" => Ok(FilterKind::Ukf),
        other => Err(CliError::Config(format!(
            "unknown filter `{other}` (expected bkf, ekf, ukf)"
        ))),
    }
}

pub fn parse_pairing(text: &str) -> Result<CrossCovPairing, CliError> {
    match text {
        "regenerated" => Ok(CrossCovPairing::Regenerated),
        "mixed" => Ok(CrossCovPairing::Mixed),
        "reused" => Ok(CrossCovPairing::Reused),
        other => Err(CliError::Config(format!(
            "unknown pairing `{other}` (expected regenerated, mixed, reused)"
        ))),
    }
}

fn pairing_name(p: CrossCovPairing) -> &'static str {
    match p {
        CrossCovPairing::Regenerated => "regenerated",
        CrossCovPairing::Mixed => "mixed",
        CrossCovPairing::Reused => "reused",
    }
}

/// Renders `filter.cfg`.
pub fn write_filter_config(fcfg: &FilterConfig) -> String {
    let mut out = String::from("# kalman-bench filter configuration\n");
    let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    kv("filter", fcfg.kind.to_string());
    kv("alpha", format!("{}", fcfg.ut.alpha));
    kv("beta", format!("{}", fcfg.ut.beta));
    kv("kappa", format!("{}", fcfg.ut.kappa));
    kv("pairing", pairing_name(fcfg.pairing).to_string());
    if let Some(m) = &fcfg.init_mean {
        kv("init_state", join_floats(m.as_slice()));
    }
    if let Some(d) = &fcfg.init_cov_diag {
        kv("init_cov_diag", join_floats(d));
    }
    if let Some(s) = fcfg.substeps {
        kv("filter_substeps", s.to_string());
    }
    if let Some(p) = &fcfg.process_noise {
        kv("filter_process", join_floats(p));
    }
    if let Some(m) = &fcfg.measurement_noise {
        kv("filter_measurement", join_floats(m));
    }
    out
}

pub fn parse_filter_config(text: &str) -> Result<FilterConfig, CliError> {
    let entries = parse_kv(text)?;
    let kind = entries
        .iter()
        .find(|e| e.key == "filter")
        .ok_or_else(|| CliError::Config("filter.cfg is missing the `filter` key".into()))?;
    let mut fcfg = FilterConfig::new(parse_filter_kind(&kind.value)?);
    let mut alpha = fcfg.ut.alpha;
    let mut beta = fcfg.ut.beta;
    let mut kappa = fcfg.ut.kappa;
    for e in &entries {
        match e.key.as_str() {
            "filter" => {}
            "alpha" => alpha = parse_float(e)?,
            "beta" => beta = parse_float(e)?,
            "kappa" => kappa = parse_float(e)?,
            "pairing" => fcfg.pairing = parse_pairing(&e.value)?,
            "init_state" => {
                fcfg.init_mean = Some(Vector::new(split_floats(&e.value, "init_state")?))
            }
            "init_cov_diag" => {
                fcfg.init_cov_diag = Some(split_floats(&e.value, "init_cov_diag")?)
            }
            "filter_substeps" => {
                fcfg.substeps = Some(e.value.parse().map_err(|_| {
                    CliError::Config(format!("`filter_substeps`: `{}` is not an integer", e.value))
                })?);
            }
            "filter_process" => {
                fcfg.process_noise = Some(split_floats(&e.value, "filter_process")?)
            }
            "filter_measurement" => {
                fcfg.measurement_noise = Some(split_floats(&e.value, "filter_measurement")?)
            }
            _ => return Err(unknown_key(e)),
        }
    }
    fcfg.ut = UtParams::new(alpha, beta, kappa)
        .map_err(|e| CliError::Config(format!("invalid UT parameters: {e}")))?;
    Ok(fcfg)
}

/// First 16 hex characters of the SHA-256 of a config rendering; recorded
/// in CSV metadata so artifacts can be matched to their configuration.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut hex = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}
