//! Extended Kalman filter: nonlinear mean propagation with Jacobian-based
//! covariance propagation, plus a finite-difference Jacobian validator.

use crate::bkf::{correct_with_h, LinearModel};
use crate::estimate::{CorrectionReport, FilterError, StateEstimate};
use crate::linalg::{Matrix, Vector};

/// A nonlinear state-space model: transition map `f`, measurement map `h`,
/// and the additive per-step noise covariances. The transition is expected
/// to fold any control effect in (`u` may be empty for autonomous systems).
///
/// Implementations must be pure: the filters call the maps repeatedly and
/// out of order.
pub trait NonlinearModel {
    fn state_dim(&self) -> usize;
    fn measurement_dim(&self) -> usize;
    fn transition(&self, x: &Vector, u: &[f64], dt: f64) -> Vector;
    fn measure(&self, x: &Vector) -> Vector;
    fn process_noise(&self) -> Matrix;
    fn measurement_noise(&self) -> Matrix;
}

/// Analytic Jacobians for the EKF. Supplied per scenario and validated
/// against finite differences by [`jacobian_check`].
pub trait DifferentiableModel: NonlinearModel {
    fn transition_jacobian(&self, x: &Vector, u: &[f64], dt: f64) -> Matrix;
    fn measurement_jacobian(&self, x: &Vector) -> Matrix;
}

/// Prediction phase: x̂ ← f(x̂, u), P ← J·P·Jᵀ + Q with J evaluated at the
/// prior mean.
pub fn ekf_predict<M: DifferentiableModel + ?Sized>(
    prior: &StateEstimate,
    model: &M,
    u: &[f64],
    dt: f64,
) -> Result<StateEstimate, FilterError> {
    if dt <= 0.0 {
        return Err(FilterError::NonPositiveStep { dt });
    }
    let mean = model.transition(&prior.mean, u, dt);
    if !mean.all_finite() {
        return Err(FilterError::Diverged {
            step: prior.step + 1,
            detail: format!("transition produced non-finite state from {:?}", prior.mean),
        });
    }
    let j = model.transition_jacobian(&prior.mean, u, dt);
    let cov = j
        .matmul(&prior.cov)?
        .matmul(&j.transpose())?
        .add(&model.process_noise())?
        .symmetrized();
    StateEstimate::new(mean, cov, prior.step + 1, prior.time + dt)
}

/// Correction phase with ẑ = h(x̂) and H replaced by the measurement
/// Jacobian at the predicted mean.
pub fn ekf_correct<M: DifferentiableModel + ?Sized>(
    pred: &StateEstimate,
    model: &M,
    z: &Vector,
) -> Result<CorrectionReport, FilterError> {
    let z_pred = model.measure(&pred.mean);
    if !z_pred.all_finite() {
        return Err(FilterError::Diverged {
            step: pred.step,
            detail: "measurement map produced non-finite prediction".into(),
        });
    }
    let h = model.measurement_jacobian(&pred.mean);
    correct_with_h(pred, &h, &model.measurement_noise(), z, z_pred)
}

/// Outcome of a finite-difference Jacobian comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    pub pass: bool,
    pub max_rel_error: f64,
    /// Entry (row, col) where the worst deviation occurred.
    pub worst: (usize, usize),
}

/// Compares an analytic Jacobian against central finite differences of
/// `map` at `point`, with per-component step hᵢ = max(1e-6, 1e-6·|xᵢ|).
/// Deviations are measured relative to the larger of the two entries with a
/// small absolute floor, so exact zeros compare cleanly.
pub fn jacobian_check(
    map: impl Fn(&Vector) -> Vector,
    point: &Vector,
    analytic: &Matrix,
    rel_tol: f64,
) -> JacobianReport {
    assert!(rel_tol > 0.0, "rel_tol must be positive");
    let n = point.len();
    let m = analytic.rows();
    let mut max_rel = 0.0f64;
    let mut worst = (0, 0);
    for jcol in 0..n {
        let h = (1e-6f64).max(1e-6 * point[jcol].abs());
        let mut fwd = point.clone();
        let mut bwd = point.clone();
        fwd[jcol] += h;
        bwd[jcol] -= h;
        let f_fwd = map(&fwd);
        let f_bwd = map(&bwd);
        for irow in 0..m {
            let numeric = (f_fwd[irow] - f_bwd[irow]) / (2.0 * h);
            let a = analytic[(irow, jcol)];
            let scale = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (numeric - a).abs() / scale;
            if rel > max_rel {
                max_rel = rel;
                worst = (irow, jcol);
            }
        }
    }
    JacobianReport {
        pass: max_rel <= rel_tol,
        max_rel_error: max_rel,
        worst,
    }
}

/// Presents a [`LinearModel`] through the nonlinear traits, so the EKF and
/// UKF can be run on linear problems and compared against the BKF.
#[derive(Debug, Clone)]
pub struct LinearAdapter<'a> {
    pub model: &'a LinearModel,
}

impl NonlinearModel for LinearAdapter<'_> {
    fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    fn measurement_dim(&self) -> usize {
        self.model.measurement_dim()
    }

    fn transition(&self, x: &Vector, u: &[f64], _dt: f64) -> Vector {
        let fx = self.model.f.mul_vec(x).expect("state dimension mismatch");
        let bu = self
            .model
            .b
            .mul_vec(&Vector::from_slice(u))
            .expect("control dimension mismatch");
        fx.add(&bu)
    }

    fn measure(&self, x: &Vector) -> Vector {
        self.model.h.mul_vec(x).expect("state dimension mismatch")
    }

    fn process_noise(&self) -> Matrix {
        self.model.q.clone()
    }

    fn measurement_noise(&self) -> Matrix {
        self.model.r.clone()
    }
}

impl DifferentiableModel for LinearAdapter<'_> {
    fn transition_jacobian(&self, _x: &Vector, _u: &[f64], _dt: f64) -> Matrix {
        self.model.f.clone()
    }

    fn measurement_jacobian(&self, _x: &Vector) -> Matrix {
        self.model.h.clone()
    }
}
