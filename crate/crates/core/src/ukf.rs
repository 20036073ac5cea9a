//! Unscented Kalman filter: deterministic sigma-point sampling, scaled
//! weights, and prediction/correction with a cross-covariance gain.

use crate::ekf::NonlinearModel;
use crate::estimate::{CorrectionReport, FilterError, StateEstimate};
use crate::linalg::{Matrix, Vector};

/// Scaling parameters of the unscented transform. λ is derived as
/// α²(N + κ) − N; β folds prior knowledge of the distribution into the
/// central covariance weight (β = 2 is optimal for Gaussians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UtParams {
    fn default() -> Self {
        UtParams { alpha: 1e-3, beta: 2.0, kappa: 0.0 }
    }
}

impl UtParams {
    pub fn new(alpha: f64, beta: f64, kappa: f64) -> Result<Self, FilterError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(FilterError::InvalidAlpha { alpha });
        }
        Ok(UtParams { alpha, beta, kappa })
    }

    pub fn lambda(&self, n: usize) -> f64 {
        self.alpha * self.alpha * (n as f64 + self.kappa) - n as f64
    }

    /// The two weight sequences (length 2N+1): `mean` for state and
    /// measurement predictions, `cov` for the covariance sums.
    pub fn weights(&self, n: usize) -> Result<UtWeights, FilterError> {
        let lambda = self.lambda(n);
        let denom = n as f64 + lambda;
        if denom == 0.0 {
            return Err(FilterError::SingularScaling { n, lambda });
        }
        let w0_mean = lambda / denom;
        let w0_cov = w0_mean + 1.0 - self.alpha * self.alpha + self.beta;
        let wi = 1.0 / (2.0 * denom);
        let mut mean = vec![wi; 2 * n + 1];
        let mut cov = vec![wi; 2 * n + 1];
        mean[0] = w0_mean;
        cov[0] = w0_cov;
        debug_assert!(
            (mean.iter().sum::<f64>() - 1.0).abs() <= 1e-9,
            "mean weights must sum to one"
        );
        Ok(UtWeights { mean, cov })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtWeights {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

/// The 2N+1 sigma points of a Gaussian (mean, cov) together with their
/// weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSet {
    pub points: Vec<Vector>,
    pub weights: UtWeights,
}

impl SigmaSet {
    pub fn generate(mean: &Vector, cov: &Matrix, params: &UtParams) -> Result<Self, FilterError> {
        let n = mean.len();
        let weights = params.weights(n)?;
        let points = sigma_points(mean, cov, params.lambda(n))?;
        Ok(SigmaSet { points, weights })
    }
}

/// Symmetric sigma points: the mean, then mean ± column j of the Cholesky
/// factor of (N+λ)·cov. Requires N + λ > 0 so the scaled covariance has a
/// real square root.
pub fn sigma_points(mean: &Vector, cov: &Matrix, lambda: f64) -> Result<Vec<Vector>, FilterError> {
    let n = mean.len();
    let scale = n as f64 + lambda;
    if scale <= 0.0 {
        return Err(FilterError::NonPositiveSpread { n, lambda });
    }
    let root = cov.scale(scale).cholesky()?;
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(mean.clone());
    for j in 0..n {
        points.push(mean.add(&root.column(j)));
    }
    for j in 0..n {
        points.push(mean.sub(&root.column(j)));
    }
    debug_assert!(
        (1..=n).all(|i| {
            let twin = points[i].add(&points[i + n]);
            let center = points[0].scale(2.0);
            twin.sub(&center).max_abs() <= 1e-12 * points[0].max_abs().max(1.0)
        }),
        "sigma points must be symmetric about the mean"
    );
    Ok(points)
}

/// How the correction phase pairs point sets in the state-measurement
/// cross-covariance Cₖ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossCovPairing {
    /// Fresh sigma points are drawn from (x̂ₖ|ₖ₋₁, Pₖ|ₖ₋₁) and used on both
    /// sides of Cₖ. This is the form that reduces exactly to the BKF on
    /// linear models.
    #[default]
    Regenerated,
    /// Fresh points feed the measurement side while the state side keeps the
    /// deviations of the prediction-phase propagated points f(x̄ⁱ). The two
    /// sets have different spreads, so linear-model equivalence is only
    /// approximate.
    Mixed,
    /// No regeneration: the propagated prediction points are reused for the
    /// measurement mapping as well, ignoring the process-noise widening.
    Reused,
}

/// Weighted mean over transformed points, reduced in index order.
fn weighted_mean(points: &[Vector], w: &[f64]) -> Vector {
    let mut acc = points[0].scale(w[0]);
    for (p, wi) in points.iter().zip(w).skip(1) {
        acc = acc.add(&p.scale(*wi));
    }
    acc
}

fn weighted_outer_sum(devs_a: &[Vector], devs_b: &[Vector], w: &[f64]) -> Matrix {
    let mut acc = devs_a[0].outer(&devs_b[0]).scale(w[0]);
    for i in 1..devs_a.len() {
        acc = acc
            .add(&devs_a[i].outer(&devs_b[i]).scale(w[i]))
            .expect("outer products conform");
    }
    acc
}

/// Prediction phase: propagate the sigma set of the prior through the
/// transition map and rebuild mean and covariance from the weighted points.
/// The propagated points are returned for use by the correction phase.
pub fn ukf_predict<M: NonlinearModel + ?Sized>(
    prior: &StateEstimate,
    model: &M,
    u: &[f64],
    dt: f64,
    params: &UtParams,
) -> Result<(StateEstimate, Vec<Vector>), FilterError> {
    if dt <= 0.0 {
        return Err(FilterError::NonPositiveStep { dt });
    }
    let set = SigmaSet::generate(&prior.mean, &prior.cov, params)?;
    let mut propagated = Vec::with_capacity(set.points.len());
    for p in &set.points {
        let fp = model.transition(p, u, dt);
        if !fp.all_finite() {
            return Err(FilterError::Diverged {
                step: prior.step + 1,
                detail: format!("sigma point propagated to non-finite state from {p:?}"),
            });
        }
        propagated.push(fp);
    }
    let mean = weighted_mean(&propagated, &set.weights.mean);
    let devs: Vec<Vector> = propagated.iter().map(|p| p.sub(&mean)).collect();
    let cov = weighted_outer_sum(&devs, &devs, &set.weights.cov)
        .add(&model.process_noise())?
        .symmetrized();
    let estimate = StateEstimate::new(mean, cov, prior.step + 1, prior.time + dt)?;
    Ok((estimate, propagated))
}

/// Correction phase. A fresh sigma set is drawn around the prediction
/// (unless `Reused`), mapped through the measurement function, and blended
/// with measurement `z` through the cross-covariance gain K = C·S⁻¹ with
/// P⁺ = P − K·S·Kᵀ.
pub fn ukf_correct<M: NonlinearModel + ?Sized>(
    pred: &StateEstimate,
    propagated: &[Vector],
    model: &M,
    z: &Vector,
    params: &UtParams,
    pairing: CrossCovPairing,
) -> Result<CorrectionReport, FilterError> {
    let set = match pairing {
        CrossCovPairing::Reused => SigmaSet {
            points: propagated.to_vec(),
            weights: params.weights(pred.dim())?,
        },
        _ => SigmaSet::generate(&pred.mean, &pred.cov, params)?,
    };
    let mapped: Vec<Vector> = set.points.iter().map(|p| model.measure(p)).collect();
    if mapped.iter().any(|m| !m.all_finite()) {
        return Err(FilterError::Diverged {
            step: pred.step,
            detail: "measurement map produced non-finite value on a sigma point".into(),
        });
    }
    let z_pred = weighted_mean(&mapped, &set.weights.mean);
    let z_devs: Vec<Vector> = mapped.iter().map(|m| m.sub(&z_pred)).collect();
    let s = weighted_outer_sum(&z_devs, &z_devs, &set.weights.cov)
        .add(&model.measurement_noise())?
        .symmetrized();
    let state_points: &[Vector] = match pairing {
        CrossCovPairing::Regenerated => &set.points,
        CrossCovPairing::Mixed | CrossCovPairing::Reused => {
            if propagated.len() != set.points.len() {
                return Err(FilterError::LinAlg(crate::linalg::LinAlgError::DimensionMismatch {
                    op: "cross-covariance pairing",
                    lhs: (propagated.len(), 1),
                    rhs: (set.points.len(), 1),
                }));
            }
            propagated
        }
    };
    let x_devs: Vec<Vector> = state_points.iter().map(|p| p.sub(&pred.mean)).collect();
    let cross = weighted_outer_sum(&x_devs, &z_devs, &set.weights.cov);
    // K = C·S⁻¹ realised as Sᵀ·Kᵀ = Cᵀ.
    let gain = s
        .solve_spd(&cross.transpose())
        .map_err(FilterError::DegenerateInnovation)?
        .transpose();
    let residual = z.sub(&z_pred);
    let mean = pred.mean.add(&gain.mul_vec(&residual)?);
    let cov = pred
        .cov
        .sub(&gain.matmul(&s)?.matmul(&gain.transpose())?)?
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
