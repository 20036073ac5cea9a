//! The benchmark dynamical systems and their measurement models, plus the
//! flat `name = value` parameter-file format used to configure them.

pub mod freefall;
pub mod lotka_volterra;
pub mod reentry;

use std::fmt;

pub use freefall::{freefall_exact, freefall_linear_model, DragFallModel, FreeFallParams, ObserveMode, STANDARD_GRAVITY};
pub use lotka_volterra::{lv_derivatives, lv_jacobian, lv_transition, LvModel, LvParams};
pub use reentry::{radar_measure, reentry_derivatives, ReentryInit, ReentryModel, ReentryParams};

use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    /// A parameter file key that the scenario does not define.
    UnknownKey { line: usize, key: String },
    /// A line that is not `name = value`.
    MalformedLine { line: usize, content: String },
    /// A value that does not parse or violates a parameter invariant.
    InvalidValue { key: String, reason: String },
    /// Geometry broke down (zero radius, state on top of the radar).
    Singularity { what: &'static str },
    /// The drag-free linear model was requested with μ > 0.
    DragUnsupportedByLinearModel { mu: f64 },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::UnknownKey { line, key } => {
                write!(f, "line {line}: unknown parameter key `{key}`")
            }
            ScenarioError::MalformedLine { line, content } => {
                write!(f, "line {line}: expected `name = value`, got `{content}`")
            }
            ScenarioError::InvalidValue { key, reason } => {
                write!(f, "invalid value for `{key}`: {reason}")
            }
            ScenarioError::Singularity { what } => write!(f, "singular geometry: {what}"),
            ScenarioError::DragUnsupportedByLinearModel { mu } => write!(
                f,
                "mu = {mu} > 0: the linear free-fall model is drag-free; use the EKF/UKF drag model"
            ),
        }
    }
}

impl std::error::Error for ScenarioError {}

/// One `name = value` line of a parameter file.
#[derive(Debug, Clone, PartialEq)]
pub struct KvEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Parses flat key-value text. Blank lines and `#` comments are skipped;
/// anything else must be `name = value`.
pub fn parse_kv(text: &str) -> Result<Vec<KvEntry>, ScenarioError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ScenarioError::MalformedLine {
                line,
                content: trimmed.to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ScenarioError::MalformedLine {
                line,
                content: trimmed.to_string(),
            });
        }
        entries.push(KvEntry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(entries)
}

pub fn parse_f64(entry: &KvEntry) -> Result<f64, ScenarioError> {
    entry.value.parse::<f64>().map_err(|e| ScenarioError::InvalidValue {
        key: entry.key.clone(),
        reason: format!("`{}` is not a number ({e})", entry.value),
    })
}

/// Noise configuration for one run.
///
/// `measurement` holds per-component standard deviations in every scenario.
/// `process` is scenario-specific: per-epoch standard deviations for free
/// fall and Lotka-Volterra (where noise is injected discretely per
/// measurement epoch), and the diagonal noise *densities* (variance per
/// second) of the velocity/drag components for re-entry, where noise enters
/// the continuous dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub process: Vec<f64>,
    pub measurement: Vec<f64>,
}

impl NoiseSpec {
    pub fn zero(process_len: usize, measurement_len: usize) -> Self {
        NoiseSpec {
            process: vec![0.0; process_len],
            measurement: vec![0.0; measurement_len],
        }
    }
}

/// A fully-parameterised benchmark system.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    FreeFall { params: FreeFallParams, observe: ObserveMode },
    LotkaVolterra { params: LvParams },
    Reentry { params: ReentryParams, init: ReentryInit },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::FreeFall { params, .. } if params.mu > 0.0 => "freefall_drag",
            Scenario::FreeFall { .. } => "freefall",
            Scenario::LotkaVolterra { .. } => "lotka_volterra",
            Scenario::Reentry { .. } => "reentry",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Scenario::FreeFall { .. } | Scenario::LotkaVolterra { .. } => 2,
            Scenario::Reentry { .. } => 5,
        }
    }

    pub fn measurement_dim(&self) -> usize {
        match self {
            Scenario::FreeFall { observe: ObserveMode::HeightOnly, .. } => 1,
            Scenario::FreeFall { .. } | Scenario::LotkaVolterra { .. } => 2,
            Scenario::Reentry { .. } => 2,
        }
    }

    pub fn state_names(&self) -> Vec<&'static str> {
        match self {
            Scenario::FreeFall { .. } => vec!["x", "v"],
            Scenario::LotkaVolterra { .. } => vec!["prey", "predator"],
            Scenario::Reentry { .. } => vec!["x1", "x2", "x3", "x4", "x5"],
        }
    }

    pub fn measurement_names(&self) -> Vec<&'static str> {
        match self {
            Scenario::FreeFall { observe: ObserveMode::HeightOnly, .. } => vec!["x"],
            Scenario::FreeFall { .. } => vec!["x", "v"],
            Scenario::LotkaVolterra { .. } => vec!["prey", "predator"],
            Scenario::Reentry { .. } => vec!["d", "theta"],
        }
    }

    /// Default measurement period in seconds.
    pub fn default_dt(&self) -> f64 {
        match self {
            Scenario::FreeFall { .. } | Scenario::LotkaVolterra { .. } => 0.01,
            Scenario::Reentry { params, .. } => 1.0 / params.sample_rate,
        }
    }

    /// Default run length in seconds (1000 epochs for free fall and
    /// Lotka-Volterra, 200 s for re-entry).
    pub fn default_duration(&self) -> f64 {
        match self {
            Scenario::FreeFall { .. } | Scenario::LotkaVolterra { .. } => 10.0,
            Scenario::Reentry { .. } => 200.0,
        }
    }

    pub fn default_noise(&self) -> NoiseSpec {
        match self {
            Scenario::FreeFall { observe, .. } => NoiseSpec {
                process: vec![0.002, 0.002],
                measurement: match observe {
                    ObserveMode::Full => vec![0.01, 0.01],
                    ObserveMode::HeightOnly => vec![0.01],
                },
            },
            Scenario::LotkaVolterra { .. } => NoiseSpec {
                process: vec![0.2, 0.2],
                measurement: vec![1.0, 1.0],
            },
            Scenario::Reentry { params, init } => NoiseSpec {
                process: init.q_sim.diag()[2..5].to_vec(),
                measurement: vec![params.meas_sigma_d, params.meas_sigma_theta],
            },
        }
    }

    /// Default filter initialisation (x̂₀|₀, P₀|₀). The sources never state
    /// one; these defaults are the documented convention of this crate and
    /// every piece is overridable.
    pub fn default_filter_init(&self, noise: &NoiseSpec) -> (Vector, Matrix) {
        match self {
            Scenario::FreeFall { params, .. } => {
                let sig = |i: usize| {
                    let s = noise.measurement[i.min(noise.measurement.len() - 1)];
                    if s > 0.0 {
                        s * s
                    } else {
                        1e-4
                    }
                };
                (
                    Vector::from_slice(&[params.x0, params.v0]),
                    Matrix::from_diag(&[sig(0), sig(1)]),
                )
            }
            Scenario::LotkaVolterra { params } => {
                let sig = |i: usize| {
                    let s = noise.measurement[i.min(noise.measurement.len() - 1)];
                    if s > 0.0 {
                        s * s
                    } else {
                        1.0
                    }
                };
                (
                    Vector::from_slice(&[params.x0, params.y0]),
                    Matrix::from_diag(&[sig(0), sig(1)]),
                )
            }
            Scenario::Reentry { init, .. } => {
                let mut mean = init.x0_true.clone();
                mean[4] = 0.0;
                (mean, Matrix::from_diag(&[1e-6, 1e-6, 1e-6, 1e-6, 1.0]))
            }
        }
    }
}
