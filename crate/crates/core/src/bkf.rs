//! Basic Kalman filter for linear systems, plus the arbitrary-gain posterior
//! covariance (Joseph form) used as a cross-check.

use crate::estimate::{CorrectionReport, FilterError, StateEstimate};
use crate::linalg::{LinAlgError, Matrix, Vector};

/// One step of linear dynamics and observation:
/// state transition `f` (N×N), control input `b` (N×L), observation `h`
/// (K×N), process noise `q` (N×N) and measurement noise `r` (K×K).
///
/// The matrices describe a single step, so a caller using variable step
/// sizes rebuilds the model per step. The control vector is supplied per
/// call.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub f: Matrix,
    pub b: Matrix,
    pub h: Matrix,
    pub q: Matrix,
    pub r: Matrix,
}

impl LinearModel {
    pub fn new(f: Matrix, b: Matrix, h: Matrix, q: Matrix, r: Matrix) -> Result<Self, FilterError> {
        let n = f.rows();
        let mismatch = |op: &'static str, m: &Matrix, want: (usize, usize)| {
            FilterError::LinAlg(LinAlgError::DimensionMismatch {
                op,
                lhs: m.shape(),
                rhs: want,
            })
        };
        if !f.is_square() {
            return Err(mismatch("transition matrix", &f, (n, n)));
        }
        if b.rows() != n {
            return Err(mismatch("control matrix", &b, (n, b.cols())));
        }
        if h.cols() != n {
            return Err(mismatch("observation matrix", &h, (h.rows(), n)));
        }
        // independent measurements imply K <= N
        if h.rows() > n {
            return Err(mismatch("observation matrix", &h, (n, n)));
        }
        if q.shape() != (n, n) {
            return Err(mismatch("process noise", &q, (n, n)));
        }
        let k = h.rows();
        if r.shape() != (k, k) {
            return Err(mismatch("measurement noise", &r, (k, k)));
        }
        for (name, m) in [("process noise", &q), ("measurement noise", &r)] {
            let dev = m.symmetry_deviation();
            if dev > crate::estimate::COV_SYMMETRY_TOL {
                let _ = name;
                return Err(FilterError::AsymmetricCovariance { max_rel_dev: dev });
            }
            if let Some((i, d)) = m.diag().iter().enumerate().find(|(_, d)| **d < 0.0) {
                return Err(FilterError::NegativeVariance { index: i, value: *d });
            }
        }
        Ok(LinearModel { f, b, h, q, r })
    }

    pub fn state_dim(&self) -> usize {
        self.f.rows()
    }

    pub fn measurement_dim(&self) -> usize {
        self.h.rows()
    }
}

/// Prediction phase: x̂ ← F·x̂ + B·u and P ← F·P·Fᵀ + Q (symmetrised).
pub fn bkf_predict(
    prior: &StateEstimate,
    model: &LinearModel,
    u: &Vector,
    dt: f64,
) -> Result<StateEstimate, FilterError> {
    if dt <= 0.0 {
        return Err(FilterError::NonPositiveStep { dt });
    }
    let mean = model.f.mul_vec(&prior.mean)?.add(&model.b.mul_vec(u)?);
    let cov = model
        .f
        .matmul(&prior.cov)?
        .matmul(&model.f.transpose())?
        .add(&model.q)?
        .symmetrized();
    StateEstimate::new(mean, cov, prior.step + 1, prior.time + dt)
}

/// Correction phase against a predicted measurement `z_pred`. Shared by the
/// BKF (ẑ = H·x̂) and the EKF (ẑ = h(x̂), H = Jacobian).
pub(crate) fn correct_with_h(
    pred: &StateEstimate,
    h: &Matrix,
    r: &Matrix,
    z: &Vector,
    z_pred: Vector,
) -> Result<CorrectionReport, FilterError> {
    let residual = z.sub(&z_pred);
    let s = h
        .matmul(&pred.cov)?
        .matmul(&h.transpose())?
        .add(r)?
        .symmetrized();
    // Gain by solving S·Kᵀ = H·P instead of forming S⁻¹.
    let hp = h.matmul(&pred.cov)?;
    let gain = s
        .solve_spd(&hp)
        .map_err(FilterError::DegenerateInnovation)?
        .transpose();
    let mean = pred.mean.add(&gain.mul_vec(&residual)?);
    let n = pred.dim();
    let cov = Matrix::identity(n)
        .sub(&gain.matmul(h)?)?
        .matmul(&pred.cov)?
        .symmetrized();
    let posterior = StateEstimate::new(mean, cov, pred.step, pred.time)?;
    Ok(CorrectionReport {
        predicted: z_pred,
        residual,
        innovation_cov: s,
        gain,
        posterior,
    })
}

/// Correction phase: blends the a priori estimate with measurement `z`.
pub fn bkf_correct(
    pred: &StateEstimate,
    model: &LinearModel,
    z: &Vector,
) -> Result<CorrectionReport, FilterError> {
    let z_pred = model.h.mul_vec(&pred.mean)?;
    correct_with_h(pred, &model.h, &model.r, z, z_pred)
}

/// Posterior covariance (I−KH)·P·(I−KH)ᵀ + K·R·Kᵀ, valid for an arbitrary
/// (not necessarily optimal) gain.
pub fn joseph_update(
    pred: &StateEstimate,
    model: &LinearModel,
    gain: &Matrix,
) -> Result<Matrix, FilterError> {
    let n = pred.dim();
    let a = Matrix::identity(n).sub(&gain.matmul(&model.h)?)?;
    let first = a.matmul(&pred.cov)?.matmul(&a.transpose())?;
    let second = gain.matmul(&model.r)?.matmul(&gain.transpose())?;
    Ok(first.add(&second)?.symmetrized())
}
