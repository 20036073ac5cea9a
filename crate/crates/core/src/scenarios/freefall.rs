//! Free fall in constant gravity, with and without viscous drag.
//!
//! The drag-free case is the linear benchmark for the BKF; with drag the
//! closed forms stay available (the transition is still affine in the
//! state) and feed the EKF/UKF through [`DragFallModel`].

use crate::bkf::LinearModel;
use crate::ekf::{DifferentiableModel, NonlinearModel};
use crate::linalg::{Matrix, Vector};
use crate::scenarios::{KvEntry, NoiseSpec, ScenarioError};

/// Standard gravitational acceleration in m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeFallParams {
    /// Release height in m.
    pub x0: f64,
    /// Release velocity in m/s (positive upwards).
    pub v0: f64,
    /// Gravitational acceleration in m/s².
    pub g: f64,
    /// Viscous drag rate μ = b/m in 1/s; 0 disables drag.
    pub mu: f64,
}

impl Default for FreeFallParams {
    fn default() -> Self {
        FreeFallParams { x0: 10.0, v0: 3.0, g: STANDARD_GRAVITY, mu: 0.0 }
    }
}

impl FreeFallParams {
    pub fn apply_kv(&mut self, entries: &[KvEntry]) -> Result<(), ScenarioError> {
        for e in entries {
            let v = super::parse_f64(e)?;
            match e.key.as_str() {
                "x0" => self.x0 = v,
                "v0" => self.v0 = v,
                "g" => self.g = v,
                "mu" => self.mu = v,
                _ => {
                    return Err(ScenarioError::UnknownKey { line: e.line, key: e.key.clone() })
                }
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.g <= 0.0 {
            return Err(ScenarioError::InvalidValue {
                key: "g".into(),
                reason: format!("{} must be positive", self.g),
            });
        }
        if self.mu < 0.0 {
            return Err(ScenarioError::InvalidValue {
                key: "mu".into(),
                reason: format!("{} must be non-negative", self.mu),
            });
        }
        Ok(())
    }
}

/// Which components the sensor reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserveMode {
    /// Height and velocity (K = 2).
    Full,
    /// Height only (K = 1).
    HeightOnly,
}

/// Closed-form height and velocity at time `t`.
///
/// With μ = 0 these are the elementary ballistic formulas. With μ > 0 the
/// exponential solutions are evaluated through `exp_m1` so the μ → 0 limit
/// stays accurate instead of cancelling catastrophically.
pub fn freefall_exact(p: &FreeFallParams, t: f64) -> (f64, f64) {
    if p.mu == 0.0 {
        let x = p.x0 + p.v0 * t - 0.5 * p.g * t * t;
        let v = p.v0 - p.g * t;
        return (x, v);
    }
    let mu = p.mu;
    // em = 1 - e^{-mu t}, exact near zero
    let em = -f64::exp_m1(-mu * t);
    let v = p.v0 * f64::exp(-mu * t) - p.g / mu * em;
    // (em - mu t)/mu = -mu t²/2 + O(mu²), the surviving -g t²/2 term
    let x = p.x0 + p.v0 * em / mu + (p.g / mu) * ((em - mu * t) / mu);
    (x, v)
}

/// The drag-free discrete model over one step `dt`, together with the
/// constant control vector u = (−g). Rejects μ > 0: drag makes the control
/// term state-independent no longer, so the drag scenario runs through the
/// nonlinear filters instead.
pub fn freefall_linear_model(
    p: &FreeFallParams,
    dt: f64,
    observe: ObserveMode,
    noise: &NoiseSpec,
) -> Result<(LinearModel, Vector), ScenarioError> {
    if p.mu > 0.0 {
        return Err(ScenarioError::DragUnsupportedByLinearModel { mu: p.mu });
    }
    let f = Matrix::from_rows(&[&[1.0, dt], &[0.0, 1.0]]);
    let b = Matrix::new(2, 1, vec![dt * dt / 2.0, dt]);
    let h = observation_matrix(observe);
    let q = Matrix::from_diag(&[
        noise.process[0] * noise.process[0],
        noise.process[1] * noise.process[1],
    ]);
    let r = measurement_cov(observe, noise);
    let model = LinearModel::new(f, b, h, q, r).expect("free-fall model dimensions are static");
    Ok((model, Vector::from_slice(&[-p.g])))
}

pub(crate) fn observation_matrix(observe: ObserveMode) -> Matrix {
    match observe {
        ObserveMode::Full => Matrix::identity(2),
        ObserveMode::HeightOnly => Matrix::from_rows(&[&[1.0, 0.0]]),
    }
}

pub(crate) fn measurement_cov(observe: ObserveMode, noise: &NoiseSpec) -> Matrix {
    let k = match observe {
        ObserveMode::Full => 2,
        ObserveMode::HeightOnly => 1,
    };
    Matrix::from_diag(
        &noise.measurement[..k]
            .iter()
            .map(|s| s * s)
            .collect::<Vec<_>>(),
    )
}

/// Exact one-step transition of the viscous-drag dynamics for the EKF/UKF.
/// The map is affine in (x, v), so the Jacobian is state-independent.
#[derive(Debug, Clone)]
pub struct DragFallModel {
    pub params: FreeFallParams,
    pub observe: ObserveMode,
    q: Matrix,
    r: Matrix,
    h: Matrix,
}

impl DragFallModel {
    pub fn new(
        params: FreeFallParams,
        observe: ObserveMode,
        noise: &NoiseSpec,
    ) -> Result<Self, ScenarioError> {
        if params.mu <= 0.0 {
            return Err(ScenarioError::InvalidValue {
                key: "mu".into(),
                reason: "the drag model requires mu > 0; use the linear model otherwise".into(),
            });
        }
        Ok(DragFallModel {
            params,
            observe,
            q: Matrix::from_diag(&[
                noise.process[0] * noise.process[0],
                noise.process[1] * noise.process[1],
            ]),
            r: measurement_cov(observe, noise),
            h: observation_matrix(observe),
        })
    }
}

impl NonlinearModel for DragFallModel {
    fn state_dim(&self) -> usize {
        2
    }

    fn measurement_dim(&self) -> usize {
        self.h.rows()
    }

    fn transition(&self, x: &Vector, _u: &[f64], dt: f64) -> Vector {
        let from = FreeFallParams { x0: x[0], v0: x[1], ..self.params };
        let (xx, vv) = freefall_exact(&from, dt);
        Vector::new(vec![xx, vv])
    }

    fn measure(&self, x: &Vector) -> Vector {
        self.h.mul_vec(x).expect("state dimension is fixed")
    }

    fn process_noise(&self) -> Matrix {
        self.q.clone()
    }

    fn measurement_noise(&self) -> Matrix {
        self.r.clone()
    }
}

impl DifferentiableModel for DragFallModel {
    fn transition_jacobian(&self, _x: &Vector, _u: &[f64], dt: f64) -> Matrix {
        let mu = self.params.mu;
        let em = -f64::exp_m1(-mu * dt);
        Matrix::from_rows(&[&[1.0, em / mu], &[0.0, f64::exp(-mu * dt)]])
    }

    fn measurement_jacobian(&self, _x: &Vector) -> Matrix {
        self.h.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ekf::jacobian_check;
    use crate::testutil::{assert_close, assert_rel_close};

    #[test]
    fn exact_recovers_initial_conditions() {
        let p = FreeFallParams::default();
        assert_eq!(freefall_exact(&p, 0.0), (10.0, 3.0));
        let pd = FreeFallParams { mu: 0.1, ..p };
        let (x, v) = freefall_exact(&pd, 0.0);
        assert_close(x, 10.0, 1e-12);
        assert_close(v, 3.0, 1e-12);
    }

    #[test]
    fn exact_drag_free_one_second() {
        let p = FreeFallParams::default();
        let (x, v) = freefall_exact(&p, 1.0);
        assert_close(x, 8.096675, 1e-12);
        assert_close(v, -6.80665, 1e-12);
    }

    #[test]
    fn exact_with_drag_one_second() {
        // Frozen from evaluating the closed forms with mu = 0.1 in f64.
        let p = FreeFallParams { mu: 0.1, ..FreeFallParams::default() };
        let (x, v) = freefall_exact(&p, 1.0);
        assert_rel_close(x, 8.110990900686913, 1e-12);
        assert_rel_close(v, -6.61774909006869, 1e-12);
    }

    #[test]
    fn drag_limit_converges_to_drag_free() {
        // Relative gap bounded by 10·μt down to tiny μ; below μt = 1e-6 the
        // physical difference itself is under 1e-6 relative.
        let base = FreeFallParams::default();
        let t = 10.0;
        let (xf, vf) = freefall_exact(&base, t);
        for mu_t in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
            let p = FreeFallParams { mu: mu_t / t, ..base };
            let (xd, vd) = freefall_exact(&p, t);
            let rel_x = ((xd - xf) / xf).abs();
            let rel_v = ((vd - vf) / vf).abs();
            assert!(rel_x <= 10.0 * mu_t, "x at mu*t = {mu_t}: rel {rel_x}");
            assert!(rel_v <= 10.0 * mu_t, "v at mu*t = {mu_t}: rel {rel_v}");
            if mu_t <= 1e-6 {
                assert!(rel_x <= 1e-6 && rel_v <= 1e-6);
            }
        }
    }

    #[test]
    fn linear_model_matrices() {
        let p = FreeFallParams::default();
        let noise = NoiseSpec { process: vec![0.002, 0.002], measurement: vec![0.01, 0.01] };
        let (model, u) = freefall_linear_model(&p, 1.0, ObserveMode::Full, &noise).unwrap();
        assert_eq!(model.f, Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]));
        assert_eq!(model.b, Matrix::new(2, 1, vec![0.5, 1.0]));
        assert_eq!(model.h, Matrix::identity(2));
        assert_eq!(u[0], -9.80665);
    }

    #[test]
    fn linear_model_height_only_row() {
        let p = FreeFallParams::default();
        let noise = NoiseSpec { process: vec![0.002, 0.002], measurement: vec![0.01] };
        let (model, _) = freefall_linear_model(&p, 0.01, ObserveMode::HeightOnly, &noise).unwrap();
        assert_eq!(model.h, Matrix::from_rows(&[&[1.0, 0.0]]));
        assert_eq!(model.r.shape(), (1, 1));
    }

    #[test]
    fn linear_model_rejects_drag() {
        let p = FreeFallParams { mu: 0.5, ..FreeFallParams::default() };
        let noise = NoiseSpec { process: vec![0.0, 0.0], measurement: vec![0.01, 0.01] };
        let err = freefall_linear_model(&p, 0.01, ObserveMode::Full, &noise).unwrap_err();
        assert!(matches!(err, ScenarioError::DragUnsupportedByLinearModel { .. }));
    }

    #[test]
    fn drag_jacobian_matches_finite_differences() {
        let p = FreeFallParams { mu: 0.37, ..FreeFallParams::default() };
        let noise = NoiseSpec { process: vec![0.0, 0.0], measurement: vec![0.01, 0.01] };
        let model = DragFallModel::new(p, ObserveMode::Full, &noise).unwrap();
        let dt = 0.25;
        let mut rng = crate::testutil::TestRng::new(19);
        for _ in 0..100 {
            let x = Vector::new(vec![rng.signed(50.0), rng.signed(20.0)]);
            let analytic = model.transition_jacobian(&x, &[], dt);
            let report = jacobian_check(|s| model.transition(s, &[], dt), &x, &analytic, 1e-5);
            assert!(report.pass, "at {x:?}: max rel error {}", report.max_rel_error);
        }
    }

    #[test]
    fn params_kv_rejects_unknown_key() {
        let mut p = FreeFallParams::default();
        let entries = crate::scenarios::parse_kv("x0 = 1\nspeed = 2").unwrap();
        let err = p.apply_kv(&entries).unwrap_err();
        assert!(matches!(err, ScenarioError::UnknownKey { line: 2, .. }));
    }
}
