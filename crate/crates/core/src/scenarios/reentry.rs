//! Planar atmospheric re-entry tracked by a ground radar: the stressful
//! nonlinear benchmark for the UKF.
//!
//! Units are km and s throughout (G·M is converted from SI once at
//! construction). The state is (x₁, x₂) position, (x₃, x₄) velocity, and
//! x₅, the log-scale of the ballistic coefficient γ = γ₀·exp(x₅).

use crate::ekf::NonlinearModel;
use crate::linalg::{Matrix, Vector};
use crate::scenarios::{KvEntry, ScenarioError};

#[derive(Debug, Clone, PartialEq)]
pub struct ReentryParams {
    /// Ballistic coefficient γ₀ in 1/km (positive; the drag term carries the
    /// minus sign, so drag opposes the velocity).
    pub gamma0: f64,
    /// Atmospheric density scale height in km.
    pub r_c: f64,
    /// Newtonian constant in m³ kg⁻¹ s⁻².
    pub g_n: f64,
    /// Earth mass in kg.
    pub mass: f64,
    /// Earth radius in km.
    pub earth_radius: f64,
    /// Radar site (x₁, x₂) in km; default is on the surface at (R, 0).
    pub radar: (f64, f64),
    /// Measurement rate in Hz.
    pub sample_rate: f64,
    /// Range noise rms in km (1 m).
    pub meas_sigma_d: f64,
    /// Elevation noise rms in rad (0.17 mrad).
    pub meas_sigma_theta: f64,
    /// G·M in km³/s², derived once from `g_n` and `mass`.
    gm: f64,
}

impl Default for ReentryParams {
    fn default() -> Self {
        let g_n = 6.6738e-11;
        let mass = 5.9726e24;
        ReentryParams {
            gamma0: 0.59783,
            r_c: 13.406,
            g_n,
            mass,
            earth_radius: 6378.137,
            radar: (6378.137, 0.0),
            sample_rate: 10.0,
            meas_sigma_d: 1e-3,
            meas_sigma_theta: 0.17e-3,
            gm: g_n * mass / 1e9,
        }
    }
}

impl ReentryParams {
    /// G·M in km³/s².
    pub fn gm(&self) -> f64 {
        self.gm
    }

    /// Same parameters with the measurement noise levels replaced.
    pub fn with_meas_sigmas(&self, sigma_d: f64, sigma_theta: f64) -> Self {
        ReentryParams { meas_sigma_d: sigma_d, meas_sigma_theta: sigma_theta, ..self.clone() }
    }

    pub fn apply_kv(&mut self, entries: &[KvEntry]) -> Result<(), ScenarioError> {
        for e in entries {
            let v = super::parse_f64(e)?;
            match e.key.as_str() {
                "gamma0" => self.gamma0 = v,
                "r_c" => self.r_c = v,
                "g_n" => self.g_n = v,
                "m" => self.mass = v,
                "earth_radius" => self.earth_radius = v,
                "radar_x1" => self.radar.0 = v,
                "radar_x2" => self.radar.1 = v,
                "sample_rate" => self.sample_rate = v,
                "meas_sigma_d" => self.meas_sigma_d = v,
                "meas_sigma_theta" => self.meas_sigma_theta = v,
                _ => {
                    return Err(ScenarioError::UnknownKey { line: e.line, key: e.key.clone() })
                }
            }
        }
        self.gm = self.g_n * self.mass / 1e9;
        if self.gamma0 <= 0.0 {
            return Err(ScenarioError::InvalidValue {
                key: "gamma0".into(),
                reason: format!("{} must be positive", self.gamma0),
            });
        }
        Ok(())
    }
}

/// Initial truth state and the two process-noise matrices: `q_sim` drives
/// the Monte-Carlo simulation (σ₅² = 0), `q_filter` drives the filter
/// (σ₃² = σ₄² = 2.4064e-5 km²/s⁴ and σ₅² = 1e-6). Both are diagonal noise
/// densities; the filter adds `q_filter`·Δt per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct ReentryInit {
    pub x0_true: Vector,
    pub q_sim: Matrix,
    pub q_filter: Matrix,
}

impl Default for ReentryInit {
    fn default() -> Self {
        let s34 = 2.4064e-5;
        ReentryInit {
            x0_true: Vector::from_slice(&[6500.4, 349.14, -1.8093, -6.7967, 0.6932]),
            q_sim: Matrix::from_diag(&[0.0, 0.0, s34, s34, 0.0]),
            q_filter: Matrix::from_diag(&[0.0, 0.0, s34, s34, 1e-6]),
        }
    }
}

/// State derivative (ẋ₁..ẋ₅) with additive accelerations `noise` =
/// (q₃, q₄, q₅). Drag scales with speed and air density, gravity with
/// 1/r³; both coefficients are negative so each force opposes its lever
/// arm.
pub fn reentry_derivatives(
    state: &Vector,
    p: &ReentryParams,
    noise: &[f64; 3],
) -> Result<Vector, ScenarioError> {
    let (x1, x2, x3, x4, x5) = (state[0], state[1], state[2], state[3], state[4]);
    let r = f64::hypot(x1, x2);
    if r == 0.0 {
        return Err(ScenarioError::Singularity { what: "radial distance r = 0" });
    }
    let v = f64::hypot(x3, x4);
    let gamma = p.gamma0 * f64::exp(x5);
    let drag = -gamma * f64::exp((p.earth_radius - r) / p.r_c) * v;
    let grav = -p.gm / (r * r * r);
    Ok(Vector::new(vec![
        x3,
        x4,
        drag * x3 + grav * x1 + noise[0],
        drag * x4 + grav * x2 + noise[1],
        noise[2],
    ]))
}

/// Radar range and elevation of `state` with additive noise (r₁, r₂). The
/// angle is computed quadrant-safe; on the benchmark trajectory it agrees
/// with the plain arctangent.
pub fn radar_measure(
    state: &Vector,
    p: &ReentryParams,
    noise: (f64, f64),
) -> Result<Vector, ScenarioError> {
    let dx = state[0] - p.radar.0;
    let dy = state[1] - p.radar.1;
    if dx == 0.0 && dy == 0.0 {
        return Err(ScenarioError::Singularity { what: "state coincides with the radar site" });
    }
    Ok(Vector::new(vec![
        f64::hypot(dx, dy) + noise.0,
        f64::atan2(dy, dx) + noise.1,
    ]))
}

/// Filter-side model: deterministic RK4 propagation across a measurement
/// epoch plus radar observation. Geometry failures surface as non-finite
/// values so the filter's divergence detection reports the epoch.
#[derive(Debug, Clone)]
pub struct ReentryModel {
    pub params: ReentryParams,
    /// Inner RK4 steps per measurement epoch.
    pub substeps: usize,
    q_epoch: Matrix,
    r: Matrix,
}

impl ReentryModel {
    /// `q_density` is the 5x5 diagonal noise-density matrix (zeros on the
    /// position entries); the per-epoch additive Q is `q_density`·dt.
    pub fn new(params: ReentryParams, q_density: &Matrix, dt: f64, substeps: usize) -> Self {
        let r = Matrix::from_diag(&[
            params.meas_sigma_d * params.meas_sigma_d,
            params.meas_sigma_theta * params.meas_sigma_theta,
        ]);
        ReentryModel { params, substeps: substeps.max(1), q_epoch: q_density.scale(dt), r }
    }
}

impl NonlinearModel for ReentryModel {
    fn state_dim(&self) -> usize {
        5
    }

    fn measurement_dim(&self) -> usize {
        2
    }

    fn transition(&self, x: &Vector, _u: &[f64], dt: f64) -> Vector {
        let h = dt / self.substeps as f64;
        let mut s = x.clone();
        for _ in 0..self.substeps {
            match crate::sim::rk4_step(
                |q| match reentry_derivatives(q, &self.params, &[0.0; 3]) {
                    Ok(d) => d,
                    Err(_) => Vector::new(vec![f64::NAN; 5]),
                },
                &s,
                h,
            ) {
                Ok(next) => s = next,
                Err(_) => return Vector::new(vec![f64::NAN; 5]),
            }
        }
        s
    }

    fn measure(&self, x: &Vector) -> Vector {
        match radar_measure(x, &self.params, (0.0, 0.0)) {
            Ok(z) => z,
            Err(_) => Vector::new(vec![f64::NAN; 2]),
        }
    }

    fn process_noise(&self) -> Matrix {
        self.q_epoch.clone()
    }

    fn measurement_noise(&self) -> Matrix {
        self.r.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{assert_close, assert_rel_close};

    #[test]
    fn geometry_at_initial_state() {
        let p = ReentryParams::default();
        let init = ReentryInit::default();
        let s = &init.x0_true;
        let r = f64::hypot(s[0], s[1]);
        let v = f64::hypot(s[2], s[3]);
        assert_rel_close(r, 6_509.769_496_656_544, 1e-12);
        assert_rel_close(v, 7.033_398_707_595_071, 1e-12);
        // initial altitude from the figure caption
        assert_close(r - p.earth_radius, 131.632, 0.01);
    }

    #[test]
    fn gravity_coefficient_at_initial_state() {
        let p = ReentryParams::default();
        let init = ReentryInit::default();
        let s = &init.x0_true;
        assert_rel_close(p.gm(), 3.98601e5, 1e-3);
        let r = f64::hypot(s[0], s[1]);
        let grav = -p.gm() / (r * r * r);
        assert_rel_close(grav, -1.445e-6, 1e-3);
    }

    #[test]
    fn derivatives_at_initial_state() {
        let p = ReentryParams::default();
        let init = ReentryInit::default();
        let d = reentry_derivatives(&init.x0_true, &p, &[0.0; 3]).unwrap();
        assert_eq!(d[0], init.x0_true[2]);
        assert_eq!(d[1], init.x0_true[3]);
        // frozen f64 evaluation of the force law at x0
        assert_rel_close(d[2], -8.564_525_288_488_3e-3, 1e-10);
        assert_rel_close(d[3], 2.6057331793670245e-3, 1e-10);
        assert_eq!(d[4], 0.0);
    }

    #[test]
    fn drag_opposes_velocity() {
        // With γ₀ > 0 the drag coefficient is negative, so the drag force
        // decelerates: sign(A·x₃) = −sign(x₃).
        let p = ReentryParams::default();
        let init = ReentryInit::default();
        let s = &init.x0_true;
        let r = f64::hypot(s[0], s[1]);
        let v = f64::hypot(s[2], s[3]);
        let gamma = p.gamma0 * f64::exp(s[4]);
        let drag = -gamma * f64::exp((p.earth_radius - r) / p.r_c) * v;
        assert!(drag < 0.0);
    }

    #[test]
    fn derivatives_reject_zero_radius() {
        let p = ReentryParams::default();
        let s = Vector::from_slice(&[0.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            reentry_derivatives(&s, &p, &[0.0; 3]),
            Err(ScenarioError::Singularity { .. })
        ));
    }

    #[test]
    fn radar_at_initial_state() {
        let p = ReentryParams::default();
        let init = ReentryInit::default();
        let z = radar_measure(&init.x0_true, &p, (0.0, 0.0)).unwrap();
        assert_rel_close(z[0], 369.92834545219694, 1e-12);
        assert_rel_close(z[1], 1.233958213797884, 1e-12);
        assert_close(z[0], 369.93, 0.01);
    }

    #[test]
    fn radar_axis_aligned_angle_is_zero() {
        let p = ReentryParams::default();
        let s = Vector::from_slice(&[p.radar.0 + 100.0, p.radar.1, 0.0, 0.0, 0.0]);
        let z = radar_measure(&s, &p, (0.0, 0.0)).unwrap();
        assert_eq!(z[1], 0.0);
        assert_eq!(z[0], 100.0);
    }

    #[test]
    fn radar_rejects_coincident_state() {
        let p = ReentryParams::default();
        let s = Vector::from_slice(&[p.radar.0, p.radar.1, 0.0, 0.0, 0.0]);
        assert!(matches!(
            radar_measure(&s, &p, (0.0, 0.0)),
            Err(ScenarioError::Singularity { .. })
        ));
    }

    #[test]
    fn radar_inverts_exactly_without_noise() {
        let p = ReentryParams::default();
        let init = ReentryInit::default();
        let z = radar_measure(&init.x0_true, &p, (0.0, 0.0)).unwrap();
        let x1 = p.radar.0 + z[0] * z[1].cos();
        let x2 = p.radar.1 + z[0] * z[1].sin();
        assert_close(x1, init.x0_true[0], 1e-9);
        assert_close(x2, init.x0_true[1], 1e-9);
    }

    #[test]
    fn trajectory_descends_initially() {
        let p = ReentryParams::default();
        let init = ReentryInit::default();
        let model = ReentryModel::new(p, &init.q_sim, 0.1, 10);
        let mut s = init.x0_true.clone();
        let r0 = f64::hypot(s[0], s[1]);
        for _ in 0..50 {
            s = model.transition(&s, &[], 0.1);
        }
        let r5 = f64::hypot(s[0], s[1]);
        assert!(r5 < r0, "altitude should decrease over the first 5 s");
    }

    #[test]
    fn params_kv_updates_gm() {
        let mut p = ReentryParams::default();
        let entries = crate::scenarios::parse_kv("m = 5.9726e24\ng_n = 6.6738e-11").unwrap();
        p.apply_kv(&entries).unwrap();
        assert_rel_close(p.gm(), 3.98601e5, 1e-3);
        let err = p.apply_kv(&crate::scenarios::parse_kv("radar = 0").unwrap());
        assert!(matches!(err, Err(ScenarioError::UnknownKey { .. })));
    }
}
