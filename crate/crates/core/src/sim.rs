//! Ground-truth generation by numerical integration, reproducible Gaussian
//! noise injection, measurement synthesis, and filter execution.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bkf::{bkf_correct, bkf_predict, LinearModel};
use crate::ekf::{ekf_correct, ekf_predict, DifferentiableModel, LinearAdapter, NonlinearModel};
use crate::estimate::{FilterError, StateEstimate};
use crate::linalg::{LinAlgError, Matrix, Vector};
use crate::scenarios::{
    freefall, freefall_exact, lv_derivatives, radar_measure, reentry_derivatives, DragFallModel,
    FreeFallParams, LvModel, NoiseSpec, ReentryModel, Scenario, ScenarioError,
};
use crate::ukf::{ukf_correct, ukf_predict, CrossCovPairing, UtParams};

#[derive(Debug)]
pub enum SimError {
    Scenario(ScenarioError),
    /// A filter step failed; carries the measurement epoch (0-based).
    Filter { epoch: usize, source: FilterError },
    /// Noise covariance passed to the sampler was indefinite.
    IndefiniteNoise(LinAlgError),
    /// Integration produced a non-finite state or derivative.
    Propagation { what: String },
    /// Filter kind not applicable to the scenario.
    IncompatibleFilter { filter: FilterKind, scenario: &'static str, reason: &'static str },
    /// Malformed run configuration.
    InvalidConfig(String),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Scenario(e) => write!(f, "{e}"),
            SimError::Filter { epoch, source } => write!(f, "epoch {epoch}: {source}"),
            SimError::IndefiniteNoise(e) => write!(f, "noise covariance: {e}"),
            SimError::Propagation { what } => write!(f, "propagation failed: {what}"),
            SimError::IncompatibleFilter { filter, scenario, reason } => {
                write!(f, "{filter} cannot run the {scenario} scenario: {reason}")
            }
            SimError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<ScenarioError> for SimError {
    fn from(e: ScenarioError) -> Self {
        SimError::Scenario(e)
    }
}

/// Seeded, portable random stream.
///
/// Algorithm: ChaCha12 (`rand_chacha` 0.9, seeded through `seed_from_u64`)
/// with standard normals from the `rand_distr` Ziggurat sampler. The same
/// seed yields the same draw sequence byte for byte on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, rng: ChaCha12Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// Draw from N(0, cov): L·ε with L the semidefinite-tolerant Cholesky
/// factor, so zero-variance components come out exactly zero.
pub fn sample_gaussian(cov: &Matrix, rng: &mut RngStream) -> Result<Vector, SimError> {
    let l = cov.cholesky_psd().map_err(SimError::IndefiniteNoise)?;
    let eps = Vector::new((0..cov.rows()).map(|_| rng.standard_normal()).collect());
    l.mul_vec(&eps).map_err(SimError::IndefiniteNoise)
}

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step(
    derivs: impl Fn(&Vector) -> Vector,
    state: &Vector,
    dt: f64,
) -> Result<Vector, SimError> {
    if dt <= 0.0 {
        return Err(SimError::InvalidConfig(format!("rk4 step dt = {dt} must be positive")));
    }
    let k1 = derivs(state);
    let k2 = derivs(&state.add(&k1.scale(dt / 2.0)));
    let k3 = derivs(&state.add(&k2.scale(dt / 2.0)));
    let k4 = derivs(&state.add(&k3.scale(dt)));
    let next = state.add(
        &k1.add(&k2.scale(2.0))
            .add(&k3.scale(2.0))
            .add(&k4)
            .scale(dt / 6.0),
    );
    if !next.all_finite() {
        return Err(SimError::Propagation { what: format!("non-finite state from {state:?}") });
    }
    Ok(next)
}

/// Time series produced by a run: the simulated truth, its noise-free
/// measurement projection, the noisy measurements, and (after
/// [`run_filter`]) the posterior estimates with pre- and post-update
/// residuals. All series share one index per measurement epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub truth: Vec<Vector>,
    pub truth_measurements: Vec<Vector>,
    pub measurements: Vec<Vector>,
    pub estimates: Vec<StateEstimate>,
    /// Innovations z − ẑ, recorded before the state update.
    pub innovations: Vec<Vector>,
    /// z − h(x̂ₖ|ₖ): the residuals between measured and filtered data.
    pub postfit_residuals: Vec<Vector>,
}

impl TrajectoryRecord {
    pub fn epochs(&self) -> usize {
        self.times.len()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.times.len();
        if self.truth.len() != n || self.measurements.len() != n || self.truth_measurements.len() != n {
            return Err(SimError::InvalidConfig("series lengths differ".into()));
        }
        if !self.estimates.is_empty()
            && (self.estimates.len() != n
                || self.innovations.len() != n
                || self.postfit_residuals.len() != n)
        {
            return Err(SimError::InvalidConfig("estimate series lengths differ".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::InvalidConfig("times must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Simulation controls: measurement period, run length, inner integration
/// refinement, injected noise, and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub dt: f64,
    pub duration: f64,
    /// Inner RK4 steps per measurement epoch (truth integration).
    pub inner_substeps: usize,
    pub noise: NoiseSpec,
}

impl SimConfig {
    pub fn defaults_for(scenario: &Scenario, seed: u64) -> Self {
        SimConfig {
            seed,
            dt: scenario.default_dt(),
            duration: scenario.default_duration(),
            inner_substeps: 10,
            noise: scenario.default_noise(),
        }
    }

    pub fn epochs(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    fn validate(&self, scenario: &Scenario) -> Result<(), SimError> {
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(SimError::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if self.epochs() == 0 {
            return Err(SimError::InvalidConfig(format!(
                "duration {} yields no epochs at dt {}",
                self.duration, self.dt
            )));
        }
        if self.inner_substeps == 0 {
            return Err(SimError::InvalidConfig("inner_substeps must be at least 1".into()));
        }
        let want_process = match scenario {
            Scenario::Reentry { .. } => 3,
            _ => scenario.state_dim(),
        };
        if self.noise.process.len() != want_process {
            return Err(SimError::InvalidConfig(format!(
                "process noise needs {want_process} entries, got {}",
                self.noise.process.len()
            )));
        }
        if self.noise.measurement.len() != scenario.measurement_dim() {
            return Err(SimError::InvalidConfig(format!(
                "measurement noise needs {} entries, got {}",
                scenario.measurement_dim(),
                self.noise.measurement.len()
            )));
        }
        if self.noise.process.iter().chain(&self.noise.measurement).any(|s| *s < 0.0) {
            return Err(SimError::InvalidConfig("noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

/// Generates truth and measurements for a scenario. Free-fall truth uses
/// the closed forms (per-step exact propagation); Lotka-Volterra and
/// re-entry integrate with RK4 at `inner_substeps` per epoch. Process noise
/// is injected discretely per epoch for free fall and Lotka-Volterra; for
/// re-entry it enters the derivatives as piecewise-constant accelerations
/// over each inner step, scaled from the configured noise densities.
pub fn simulate(scenario: &Scenario, cfg: &SimConfig) -> Result<TrajectoryRecord, SimError> {
    cfg.validate(scenario)?;
    let mut rng = RngStream::new(cfg.seed);
    let epochs = cfg.epochs();
    let mut record = TrajectoryRecord::default();

    match scenario {
        Scenario::FreeFall { params, observe } => {
            let h = freefall::observation_matrix(*observe);
            let q = Matrix::from_diag(
                &cfg.noise.process.iter().map(|s| s * s).collect::<Vec<_>>(),
            );
            let r = freefall::measurement_cov(*observe, &cfg.noise);
            let mut state = Vector::from_slice(&[params.x0, params.v0]);
            for k in 0..epochs {
                let from = FreeFallParams { x0: state[0], v0: state[1], ..*params };
                let (x, v) = freefall_exact(&from, cfg.dt);
                state = Vector::new(vec![x, v]);
                state = state.add(&sample_gaussian(&q, &mut rng)?);
                let clean = h.mul_vec(&state).expect("observation dims are static");
                let z = clean.add(&sample_gaussian(&r, &mut rng)?);
                push_epoch(&mut record, (k + 1) as f64 * cfg.dt, state.clone(), clean, z);
            }
        }
        Scenario::LotkaVolterra { params } => {
            let q = Matrix::from_diag(
                &cfg.noise.process.iter().map(|s| s * s).collect::<Vec<_>>(),
            );
            let r = Matrix::from_diag(
                &cfg.noise.measurement.iter().map(|s| s * s).collect::<Vec<_>>(),
            );
            let h_step = cfg.dt / cfg.inner_substeps as f64;
            let mut state = Vector::from_slice(&[params.x0, params.y0]);
            for k in 0..epochs {
                for _ in 0..cfg.inner_substeps {
                    state = rk4_step(|s| lv_derivatives(s, params), &state, h_step)?;
                }
                state = state.add(&sample_gaussian(&q, &mut rng)?);
                // populations cannot go negative; additive noise near an
                // orbit trough would otherwise blow up the dynamics
                state = Vector::new(state.iter().map(|p| p.max(0.0)).collect());
                let z = state.add(&sample_gaussian(&r, &mut rng)?);
                push_epoch(&mut record, (k + 1) as f64 * cfg.dt, state.clone(), state.clone(), z);
            }
        }
        Scenario::Reentry { params, init } => {
            let h_step = cfg.dt / cfg.inner_substeps as f64;
            // densities -> per-substep piecewise-constant accelerations
            let kick_sigma: Vec<f64> =
                cfg.noise.process.iter().map(|d| (d / h_step).sqrt()).collect();
            let mut state = init.x0_true.clone();
            for k in 0..epochs {
                for _ in 0..cfg.inner_substeps {
                    let kicks = [
                        kick_sigma[0] * rng.standard_normal(),
                        kick_sigma[1] * rng.standard_normal(),
                        kick_sigma[2] * rng.standard_normal(),
                    ];
                    state = rk4_step(
                        |s| match reentry_derivatives(s, params, &kicks) {
                            Ok(d) => d,
                            Err(_) => Vector::new(vec![f64::NAN; 5]),
                        },
                        &state,
                        h_step,
                    )?;
                }
                let clean = radar_measure(&state, params, (0.0, 0.0))?;
                let z = Vector::new(vec![
                    clean[0] + cfg.noise.measurement[0] * rng.standard_normal(),
                    clean[1] + cfg.noise.measurement[1] * rng.standard_normal(),
                ]);
                push_epoch(&mut record, (k + 1) as f64 * cfg.dt, state.clone(), clean, z);
            }
        }
    }
    record.validate()?;
    Ok(record)
}

fn push_epoch(record: &mut TrajectoryRecord, t: f64, truth: Vector, clean: Vector, z: Vector) {
    record.times.push(t);
    record.truth.push(truth);
    record.truth_measurements.push(clean);
    record.measurements.push(z);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Bkf,
    Ekf,
    Ukf,
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::Bkf => "bkf",
            FilterKind::Ekf => "ekf",
            FilterKind::Ukf => "ukf",
        })
    }
}

/// Filter-side configuration. The filter's assumed noise defaults to the
/// scenario's nominal levels (falling back per component when the simulated
/// noise was overridden to zero), and the initial estimate defaults to the
/// scenario convention; everything is overridable.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub kind: FilterKind,
    pub ut: UtParams,
    pub pairing: CrossCovPairing,
    pub init_mean: Option<Vector>,
    pub init_cov_diag: Option<Vec<f64>>,
    /// Inner RK4 steps per epoch for the filter's own propagation
    /// (re-entry); defaults to the simulation setting.
    pub substeps: Option<usize>,
    /// Filter process noise: per-epoch σ for free fall and Lotka-Volterra,
    /// the full 5-entry diagonal of noise densities for re-entry.
    pub process_noise: Option<Vec<f64>>,
    /// Filter measurement noise σ per observed component.
    pub measurement_noise: Option<Vec<f64>>,
}

impl FilterConfig {
    pub fn new(kind: FilterKind) -> Self {
        FilterConfig {
            kind,
            ut: UtParams::default(),
            pairing: CrossCovPairing::default(),
            init_mean: None,
            init_cov_diag: None,
            substeps: None,
            process_noise: None,
            measurement_noise: None,
        }
    }
}

/// The noise levels the filter assumes: explicit override, else the
/// simulated level, else (for zeroed components) the scenario default.
/// The fallback keeps zero-noise simulations filterable: a filter cannot
/// work with R = 0.
pub fn assumed_noise(scenario: &Scenario, sim_noise: &NoiseSpec, fcfg: &FilterConfig) -> NoiseSpec {
    let defaults = scenario.default_noise();
    let merge = |sim: &[f64], def: &[f64]| -> Vec<f64> {
        sim.iter()
            .zip(def)
            .map(|(s, d)| if *s > 0.0 { *s } else { *d })
            .collect()
    };
    NoiseSpec {
        process: fcfg
            .process_noise
            .clone()
            .unwrap_or_else(|| merge(&sim_noise.process, &defaults.process)),
        measurement: fcfg
            .measurement_noise
            .clone()
            .unwrap_or_else(|| merge(&sim_noise.measurement, &defaults.measurement)),
    }
}

/// Runs the chosen filter over a simulated record, alternating predict and
/// correct per measurement epoch. Innovations are recorded before each
/// update; the post-fit residuals z − h(x̂ₖ|ₖ) afterwards. Any filter error
/// aborts with its epoch index.
pub fn run_filter(
    scenario: &Scenario,
    cfg: &SimConfig,
    record: &TrajectoryRecord,
    fcfg: &FilterConfig,
) -> Result<TrajectoryRecord, SimError> {
    record.validate()?;
    if record.epochs() == 0 {
        return Err(SimError::InvalidConfig("record has no epochs".into()));
    }
    let noise = assumed_noise(scenario, &cfg.noise, fcfg);
    let (default_mean, default_cov) = scenario.default_filter_init(&noise);
    let mean0 = fcfg.init_mean.clone().unwrap_or(default_mean);
    let cov0 = match &fcfg.init_cov_diag {
        Some(diag) => Matrix::from_diag(diag),
        None => default_cov,
    };
    if mean0.len() != scenario.state_dim() || cov0.rows() != scenario.state_dim() {
        return Err(SimError::InvalidConfig(format!(
            "initial estimate has dimension {}, scenario needs {}",
            mean0.len(),
            scenario.state_dim()
        )));
    }
    let init = StateEstimate::new(mean0, cov0, 0, 0.0)
        .map_err(|source| SimError::Filter { epoch: 0, source })?;
    let substeps = fcfg.substeps.unwrap_or(cfg.inner_substeps);

    let mut out = record.clone();
    out.estimates.clear();
    out.innovations.clear();
    out.postfit_residuals.clear();

    match (scenario, fcfg.kind) {
        (Scenario::FreeFall { params, .. }, FilterKind::Bkf) if params.mu > 0.0 => {
            return Err(SimError::IncompatibleFilter {
                filter: FilterKind::Bkf,
                scenario: scenario.name(),
                reason: "the linear model is drag-free; use ekf or ukf",
            });
        }
        (Scenario::FreeFall { params, observe }, FilterKind::Bkf) => {
            let (model, u) = crate::scenarios::freefall_linear_model(params, cfg.dt, *observe, &noise)?;
            run_bkf_loop(&model, &u, cfg.dt, init, record, &mut out)?;
        }
        (Scenario::FreeFall { params, observe }, kind) if params.mu == 0.0 => {
            let (model, u) = crate::scenarios::freefall_linear_model(params, cfg.dt, *observe, &noise)?;
            let adapter = LinearAdapter { model: &model };
            let uv = u.as_slice().to_vec();
            match kind {
                FilterKind::Ekf => run_ekf_loop(&adapter, &uv, cfg.dt, init, record, &mut out)?,
                _ => run_ukf_loop(&adapter, &uv, cfg.dt, init, record, &mut out, fcfg)?,
            }
        }
        (Scenario::FreeFall { params, observe }, kind) => {
            let model = DragFallModel::new(*params, *observe, &noise)?;
            match kind {
                FilterKind::Ekf => run_ekf_loop(&model, &[], cfg.dt, init, record, &mut out)?,
                _ => run_ukf_loop(&model, &[], cfg.dt, init, record, &mut out, fcfg)?,
            }
        }
        (Scenario::LotkaVolterra { .. }, FilterKind::Bkf) => {
            return Err(SimError::IncompatibleFilter {
                filter: FilterKind::Bkf,
                scenario: scenario.name(),
                reason: "the dynamics are nonlinear; use ekf or ukf",
            });
        }
        (Scenario::LotkaVolterra { params }, FilterKind::Ekf) => {
            let model = LvModel::new(*params, &noise);
            run_ekf_loop(&model, &[], cfg.dt, init, record, &mut out)?;
        }
        (Scenario::LotkaVolterra { params }, FilterKind::Ukf) => {
            let model = LvModel::new(*params, &noise);
            run_ukf_loop(&model, &[], cfg.dt, init, record, &mut out, fcfg)?;
        }
        (Scenario::Reentry { .. }, FilterKind::Bkf) => {
            return Err(SimError::IncompatibleFilter {
                filter: FilterKind::Bkf,
                scenario: scenario.name(),
                reason: "the dynamics and radar model are nonlinear; use ukf",
            });
        }
        (Scenario::Reentry { .. }, FilterKind::Ekf) => {
            return Err(SimError::IncompatibleFilter {
                filter: FilterKind::Ekf,
                scenario: scenario.name(),
                reason: "no analytic Jacobians are defined for re-entry; use ukf",
            });
        }
        (Scenario::Reentry { params, init: rinit }, FilterKind::Ukf) => {
            let q_density = match &fcfg.process_noise {
                Some(d) if d.len() == 5 => Matrix::from_diag(d),
                Some(d) => {
                    return Err(SimError::InvalidConfig(format!(
                        "re-entry filter process noise needs 5 diagonal entries, got {}",
                        d.len()
                    )))
                }
                None => rinit.q_filter.clone(),
            };
            let fparams = match &fcfg.measurement_noise {
                Some(m) if m.len() == 2 => params.with_meas_sigmas(m[0], m[1]),
                Some(_) => {
                    return Err(SimError::InvalidConfig(
                        "re-entry filter measurement noise needs 2 entries".into(),
                    ))
                }
                None => params.clone(),
            };
            let model = ReentryModel::new(fparams, &q_density, cfg.dt, substeps);
            run_ukf_loop(&model, &[], cfg.dt, init, record, &mut out, fcfg)?;
        }
    }
    out.validate()?;
    Ok(out)
}

fn record_step(
    out: &mut TrajectoryRecord,
    report: crate::estimate::CorrectionReport,
    z: &Vector,
    measure: impl Fn(&Vector) -> Vector,
) -> StateEstimate {
    let postfit = z.sub(&measure(&report.posterior.mean));
    out.estimates.push(report.posterior.clone());
    out.innovations.push(report.residual);
    out.postfit_residuals.push(postfit);
    report.posterior
}

fn run_bkf_loop(
    model: &LinearModel,
    u: &Vector,
    dt: f64,
    init: StateEstimate,
    record: &TrajectoryRecord,
    out: &mut TrajectoryRecord,
) -> Result<(), SimError> {
    let mut est = init;
    for (epoch, z) in record.measurements.iter().enumerate() {
        let step = || -> Result<crate::estimate::CorrectionReport, FilterError> {
            let pred = bkf_predict(&est, model, u, dt)?;
            bkf_correct(&pred, model, z)
        };
        let report = step().map_err(|source| SimError::Filter { epoch, source })?;
        est = record_step(out, report, z, |m| {
            model.h.mul_vec(m).expect("observation dims are static")
        });
    }
    Ok(())
}

fn run_ekf_loop<M: DifferentiableModel>(
    model: &M,
    u: &[f64],
    dt: f64,
    init: StateEstimate,
    record: &TrajectoryRecord,
    out: &mut TrajectoryRecord,
) -> Result<(), SimError> {
    let mut est = init;
    for (epoch, z) in record.measurements.iter().enumerate() {
        let step = || -> Result<crate::estimate::CorrectionReport, FilterError> {
            let pred = ekf_predict(&est, model, u, dt)?;
            ekf_correct(&pred, model, z)
        };
        let report = step().map_err(|source| SimError::Filter { epoch, source })?;
        est = record_step(out, report, z, |m| model.measure(m));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_ukf_loop<M: NonlinearModel>(
    model: &M,
    u: &[f64],
    dt: f64,
    init: StateEstimate,
    record: &TrajectoryRecord,
    out: &mut TrajectoryRecord,
    fcfg: &FilterConfig,
) -> Result<(), SimError> {
    let mut est = init;
    for (epoch, z) in record.measurements.iter().enumerate() {
        let step = || -> Result<crate::estimate::CorrectionReport, FilterError> {
            let (pred, propagated) = ukf_predict(&est, model, u, dt, &fcfg.ut)?;
            ukf_correct(&pred, &propagated, model, z, &fcfg.ut, fcfg.pairing)
        };
        let report = step().map_err(|source| SimError::Filter { epoch, source })?;
        est = record_step(out, report, z, |m| model.measure(m));
    }
    Ok(())
}
