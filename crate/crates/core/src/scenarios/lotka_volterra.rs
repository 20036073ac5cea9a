//! Lotka-Volterra predator-prey dynamics: the nonlinear benchmark for the
//! EKF. The filter works with the Euler-discretised transition and its
//! Jacobian while the simulation truth is integrated with RK4; the model
//! mismatch is intentional.

use crate::ekf::{DifferentiableModel, NonlinearModel};
use crate::linalg::{Matrix, Vector};
use crate::scenarios::{KvEntry, NoiseSpec, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LvParams {
    /// Prey growth rate.
    pub alpha: f64,
    /// Predation rate.
    pub beta: f64,
    /// Predator death rate.
    pub gamma: f64,
    /// Predator reproduction rate.
    pub delta: f64,
    /// Initial prey population.
    pub x0: f64,
    /// Initial predator population.
    pub y0: f64,
}

impl Default for LvParams {
    fn default() -> Self {
        LvParams { alpha: 1.0, beta: 0.2, gamma: 5.0, delta: 0.3, x0: 10.0, y0: 10.0 }
    }
}

impl LvParams {
    pub fn apply_kv(&mut self, entries: &[KvEntry]) -> Result<(), ScenarioError> {
        for e in entries {
            let v = super::parse_f64(e)?;
            match e.key.as_str() {
                "alpha" => self.alpha = v,
                "beta" => self.beta = v,
                "gamma" => self.gamma = v,
                "delta" => self.delta = v,
                "x0" => self.x0 = v,
                "y0" => self.y0 = v,
                _ => {
                    return Err(ScenarioError::UnknownKey { line: e.line, key: e.key.clone() })
                }
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (k, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ] {
            if v <= 0.0 {
                return Err(ScenarioError::InvalidValue {
                    key: k.into(),
                    reason: format!("{v} must be positive"),
                });
            }
        }
        for (k, v) in [("x0", self.x0), ("y0", self.y0)] {
            if v < 0.0 {
                return Err(ScenarioError::InvalidValue {
                    key: k.into(),
                    reason: format!("population {v} must be non-negative"),
                });
            }
        }
        Ok(())
    }
}

/// (dx/dt, dy/dt) = (x(α − βy), y(−γ + δx)).
pub fn lv_derivatives(state: &Vector, p: &LvParams) -> Vector {
    let (x, y) = (state[0], state[1]);
    Vector::new(vec![x * (p.alpha - p.beta * y), y * (-p.gamma + p.delta * x)])
}

/// One forward-Euler step of the population dynamics.
pub fn lv_transition(state: &Vector, p: &LvParams, dt: f64) -> Vector {
    let (x, y) = (state[0], state[1]);
    Vector::new(vec![
        x + x * (p.alpha - p.beta * y) * dt,
        y + y * (-p.gamma + p.delta * x) * dt,
    ])
}

/// Jacobian of [`lv_transition`] with respect to the state.
pub fn lv_jacobian(state: &Vector, p: &LvParams, dt: f64) -> Matrix {
    let (x, y) = (state[0], state[1]);
    Matrix::from_rows(&[
        &[1.0 + p.alpha * dt - p.beta * y * dt, -p.beta * x * dt],
        &[p.delta * y * dt, 1.0 - p.gamma * dt + p.delta * x * dt],
    ])
}

/// Euler-discretised filter model with identity observation of both
/// populations.
#[derive(Debug, Clone)]
pub struct LvModel {
    pub params: LvParams,
    q: Matrix,
    r: Matrix,
}

impl LvModel {
    pub fn new(params: LvParams, noise: &NoiseSpec) -> Self {
        LvModel {
            params,
            q: Matrix::from_diag(&[
                noise.process[0] * noise.process[0],
                noise.process[1] * noise.process[1],
            ]),
            r: Matrix::from_diag(&[
                noise.measurement[0] * noise.measurement[0],
                noise.measurement[1] * noise.measurement[1],
            ]),
        }
    }
}

impl NonlinearModel for LvModel {
    fn state_dim(&self) -> usize {
        2
    }

    fn measurement_dim(&self) -> usize {
        2
    }

    fn transition(&self, x: &Vector, _u: &[f64], dt: f64) -> Vector {
        lv_transition(x, &self.params, dt)
    }

    fn measure(&self, x: &Vector) -> Vector {
        x.clone()
    }

    fn process_noise(&self) -> Matrix {
        self.q.clone()
    }

    fn measurement_noise(&self) -> Matrix {
        self.r.clone()
    }
}

impl DifferentiableModel for LvModel {
    fn transition_jacobian(&self, x: &Vector, _u: &[f64], dt: f64) -> Matrix {
        lv_jacobian(x, &self.params, dt)
    }

    fn measurement_jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::identity(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ekf::jacobian_check;
    use crate::sim::rk4_step;
    use crate::testutil::{assert_close, TestRng};

    #[test]
    fn derivatives_limits() {
        let p = LvParams::default();
        // no predators: pure exponential prey growth
        let d = lv_derivatives(&Vector::from_slice(&[4.0, 0.0]), &p);
        assert_eq!(d.as_slice(), &[4.0, 0.0]);
        // no prey: exponential predator decay
        let d = lv_derivatives(&Vector::from_slice(&[0.0, 4.0]), &p);
        assert_eq!(d.as_slice(), &[0.0, -20.0]);
    }

    #[test]
    fn derivatives_reference_point() {
        let p = LvParams::default();
        let d = lv_derivatives(&Vector::from_slice(&[10.0, 10.0]), &p);
        assert_close(d[0], -10.0, 1e-12);
        assert_close(d[1], -20.0, 1e-12);
    }

    #[test]
    fn transition_reference_step() {
        let p = LvParams::default();
        let s = lv_transition(&Vector::from_slice(&[10.0, 10.0]), &p, 0.01);
        assert_close(s[0], 9.9, 1e-12);
        assert_close(s[1], 9.8, 1e-12);
    }

    #[test]
    fn jacobian_reference_values() {
        let p = LvParams::default();
        let j = lv_jacobian(&Vector::from_slice(&[10.0, 10.0]), &p, 0.01);
        assert_close(j[(0, 0)], 0.99, 1e-12);
        assert_close(j[(0, 1)], -0.02, 1e-12);
        assert_close(j[(1, 0)], 0.03, 1e-12);
        assert_close(j[(1, 1)], 0.98, 1e-12);
    }

    #[test]
    fn zero_step_is_identity() {
        let p = LvParams::default();
        let s0 = Vector::from_slice(&[7.0, 3.0]);
        assert_eq!(lv_transition(&s0, &p, 0.0), s0);
        assert_eq!(lv_jacobian(&s0, &p, 0.0), Matrix::identity(2));
    }

    #[test]
    fn ekf_predict_applies_euler_step() {
        use crate::ekf::ekf_predict;
        use crate::estimate::StateEstimate;
        use crate::scenarios::NoiseSpec;
        let model = LvModel::new(
            LvParams::default(),
            &NoiseSpec { process: vec![0.2, 0.2], measurement: vec![1.0, 1.0] },
        );
        let prior = StateEstimate::new(
            Vector::from_slice(&[10.0, 10.0]),
            Matrix::from_diag(&[1.0, 1.0]),
            0,
            0.0,
        )
        .unwrap();
        let pred = ekf_predict(&prior, &model, &[], 0.01).unwrap();
        assert_close(pred.mean[0], 9.9, 1e-12);
        assert_close(pred.mean[1], 9.8, 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences_at_reference() {
        let p = LvParams::default();
        let x = Vector::from_slice(&[10.0, 10.0]);
        let analytic = lv_jacobian(&x, &p, 0.01);
        let report = jacobian_check(|s| lv_transition(s, &p, 0.01), &x, &analytic, 1e-6);
        assert!(report.pass, "max rel error {}", report.max_rel_error);
    }

    #[test]
    fn jacobian_matches_finite_differences_across_operating_range() {
        // 100 random states across the populated orbit region.
        let p = LvParams::default();
        let mut rng = TestRng::new(61);
        for _ in 0..100 {
            let x = Vector::new(vec![
                0.5 + 30.0 * rng.uniform(),
                0.5 + 15.0 * rng.uniform(),
            ]);
            let analytic = lv_jacobian(&x, &p, 0.01);
            let report = jacobian_check(|s| lv_transition(s, &p, 0.01), &x, &analytic, 1e-5);
            assert!(report.pass, "at {x:?}: max rel error {}", report.max_rel_error);
        }
    }

    #[test]
    fn euler_converges_first_order_over_fixed_interval() {
        // Chained Euler error against an RK4 reference over a fixed interval
        // halves when the step halves.
        let p = LvParams::default();
        let s0 = Vector::from_slice(&[10.0, 10.0]);
        let t_total = 0.2;
        let mut reference = s0.clone();
        for _ in 0..2000 {
            reference = rk4_step(|x| lv_derivatives(x, &p), &reference, t_total / 2000.0).unwrap();
        }
        let euler_err = |n: usize| {
            let dt = t_total / n as f64;
            let mut s = s0.clone();
            for _ in 0..n {
                s = lv_transition(&s, &p, dt);
            }
            s.sub(&reference).max_abs()
        };
        let ratio = euler_err(20) / euler_err(40);
        assert!(
            (1.7..2.4).contains(&ratio),
            "expected ~2x error reduction per halving, got {ratio}"
        );
    }
}
