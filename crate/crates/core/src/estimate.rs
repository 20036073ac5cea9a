//! State estimates and the error type shared by all three filters.

use std::fmt;

use crate::linalg::{LinAlgError, Matrix, Vector};

/// Relative symmetry tolerance enforced on covariance matrices.
pub const COV_SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum FilterError {
    /// Shape or factorisation failure in the underlying algebra.
    LinAlg(LinAlgError),
    /// The innovation covariance S could not be factored; the measurement
    /// geometry is degenerate.
    DegenerateInnovation(LinAlgError),
    /// A state or covariance stopped being finite.
    Diverged { step: u64, detail: String },
    /// Covariance failed its symmetry check.
    AsymmetricCovariance { max_rel_dev: f64 },
    /// A covariance diagonal entry is negative.
    NegativeVariance { index: usize, value: f64 },
    /// N + λ = 0: the unscented weights are undefined.
    SingularScaling { n: usize, lambda: f64 },
    /// N + λ ≤ 0: the sigma-point square root would be complex.
    NonPositiveSpread { n: usize, lambda: f64 },
    /// α outside (0, 1].
    InvalidAlpha { alpha: f64 },
    /// A step size that must be positive was not.
    NonPositiveStep { dt: f64 },
}

impl fmt::Display for FilterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterError::LinAlg(e) => write!(f, "{e}"),
            FilterError::DegenerateInnovation(e) => {
                write!(f, "innovation covariance is degenerate: {e}")
            }
            FilterError::Diverged { step, detail } => {
                write!(f, "filter diverged at step {step}: {detail}")
            }
            FilterError::AsymmetricCovariance { max_rel_dev } => {
                write!(f, "covariance is not symmetric (relative deviation {max_rel_dev:.3e})")
            }
            FilterError::NegativeVariance { index, value } => {
                write!(f, "covariance diagonal {index} is negative ({value:e})")
            }
            FilterError::SingularScaling { n, lambda } => {
                write!(f, "N + lambda = 0 (N = {n}, lambda = {lambda}): weights undefined")
            }
            FilterError::NonPositiveSpread { n, lambda } => {
                write!(f, "N + lambda = {} must be positive for sigma points", *n as f64 + lambda)
            }
            FilterError::InvalidAlpha { alpha } => {
                write!(f, "alpha = {alpha} outside (0, 1]")
            }
            FilterError::NonPositiveStep { dt } => write!(f, "dt = {dt} must be positive"),
        }
    }
}

impl std::error::Error for FilterError {}

impl From<LinAlgError> for FilterError {
    fn from(e: LinAlgError) -> Self {
        FilterError::LinAlg(e)
    }
}

/// State mean and covariance at a tagged time. `step` counts measurement
/// epochs; `time` is wall time in seconds so variable step sizes are
/// representable.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    pub mean: Vector,
    pub cov: Matrix,
    pub step: u64,
    pub time: f64,
}

impl StateEstimate {
    /// Validating constructor: covariance square and matching the mean,
    /// symmetric within [`COV_SYMMETRY_TOL`], non-negative diagonal, finite
    /// mean.
    pub fn new(mean: Vector, cov: Matrix, step: u64, time: f64) -> Result<Self, FilterError> {
        if !cov.is_square() || cov.rows() != mean.len() {
            return Err(LinAlgError::DimensionMismatch {
                op: "state estimate",
                lhs: (mean.len(), 1),
                rhs: cov.shape(),
            }
            .into());
        }
        if !mean.all_finite() || !cov.all_finite() {
            return Err(FilterError::Diverged {
                step,
                detail: "non-finite mean or covariance".into(),
            });
        }
        let dev = cov.symmetry_deviation();
        if dev > COV_SYMMETRY_TOL {
            return Err(FilterError::AsymmetricCovariance { max_rel_dev: dev });
        }
        for (i, d) in cov.diag().iter().enumerate() {
            if *d < 0.0 {
                return Err(FilterError::NegativeVariance { index: i, value: *d });
            }
        }
        Ok(StateEstimate { mean, cov, step, time })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Everything produced by one correction phase, posterior included.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionReport {
    /// Predicted measurement ẑ.
    pub predicted: Vector,
    /// Innovation z̃ = z − ẑ.
    pub residual: Vector,
    /// Innovation covariance S.
    pub innovation_cov: Matrix,
    /// Gain K.
    pub gain: Matrix,
    pub posterior: StateEstimate,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_variance() {
        let e = StateEstimate::new(
            Vector::from_slice(&[0.0]),
            Matrix::new(1, 1, vec![-1.0]),
            0,
            0.0,
        );
        assert!(matches!(e, Err(FilterError::NegativeVariance { index: 0, .. })));
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let e = StateEstimate::new(
            Vector::from_slice(&[0.0, 0.0]),
            Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]),
            0,
            0.0,
        );
        assert!(matches!(e, Err(FilterError::AsymmetricCovariance { .. })));
    }

    #[test]
    fn rejects_non_finite_mean() {
        let e = StateEstimate::new(
            Vector::from_slice(&[f64::NAN]),
            Matrix::identity(1),
            3,
            0.0,
        );
        assert!(matches!(e, Err(FilterError::Diverged { step: 3, .. })));
    }
}
