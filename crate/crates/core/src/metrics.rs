//! Residual statistics: reduced chi-squared, RMSE against truth, and
//! raw-vs-filtered noise-reduction ratios.

use std::fmt;

use crate::linalg::Vector;
use crate::sim::TrajectoryRecord;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    NoEpochs,
    /// A measurement sigma was zero or negative.
    BadSigma { component: usize, value: f64 },
    /// The raw measurement error has zero spread; the ratio is undefined.
    DegenerateRawStd { component: usize },
    MissingSeries { what: &'static str },
    DimensionMismatch { what: &'static str },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::NoEpochs => write!(f, "no epochs to evaluate"),
            MetricsError::BadSigma { component, value } => {
                write!(f, "sigma for component {component} must be positive, got {value}")
            }
            MetricsError::DegenerateRawStd { component } => {
                write!(f, "raw measurement error of component {component} has zero spread")
            }
            MetricsError::MissingSeries { what } => write!(f, "record is missing {what}"),
            MetricsError::DimensionMismatch { what } => write!(f, "dimension mismatch: {what}"),
        }
    }
}

impl std::error::Error for MetricsError {}

/// Residual-fit summary for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
    /// RMSE of estimate − truth per state component.
    pub rmse_per_component: Vec<f64>,
    /// std(filtered error)/std(raw error) per observed component.
    pub noise_reduction_ratio: Vec<f64>,
    /// Lag-1 autocorrelation of the innovations per observed component.
    pub lag1_innovation: Vec<f64>,
}

/// χ² = Σₖ Σᵢ (z̃ₖᵢ/σᵢ)² over all epochs, with dof = epochs × K (the filter
/// estimates states, not fitted parameters, so nothing is subtracted).
pub fn reduced_chi2(
    residuals: &[Vector],
    sigmas: &[f64],
) -> Result<(f64, usize, f64), MetricsError> {
    if residuals.is_empty() {
        return Err(MetricsError::NoEpochs);
    }
    if let Some((i, s)) = sigmas.iter().enumerate().find(|(_, s)| **s <= 0.0) {
        return Err(MetricsError::BadSigma { component: i, value: *s });
    }
    let k = sigmas.len();
    let mut chi2 = 0.0;
    for r in residuals {
        if r.len() != k {
            return Err(MetricsError::DimensionMismatch { what: "residual vs sigmas" });
        }
        for i in 0..k {
            let t = r[i] / sigmas[i];
            chi2 += t * t;
        }
    }
    let dof = residuals.len() * k;
    Ok((chi2, dof, chi2 / dof as f64))
}

fn std_dev(series: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = series.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = series.clone().sum::<f64>() / n as f64;
    let var = series.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    var.sqrt()
}

fn noise_reduction_per_component(
    record: &TrajectoryRecord,
) -> Result<Vec<Option<f64>>, MetricsError> {
    if record.epochs() == 0 {
        return Err(MetricsError::NoEpochs);
    }
    if record.postfit_residuals.len() != record.epochs() {
        return Err(MetricsError::MissingSeries { what: "post-fit residuals (run the filter first)" });
    }
    let k = record.measurements[0].len();
    let mut ratios = Vec::with_capacity(k);
    for i in 0..k {
        let raw = |j: usize| record.measurements[j][i] - record.truth_measurements[j][i];
        let filtered = |j: usize| raw(j) - record.postfit_residuals[j][i];
        let raw_std = std_dev((0..record.epochs()).map(raw));
        if raw_std == 0.0 {
            ratios.push(None);
        } else {
            let filt_std = std_dev((0..record.epochs()).map(filtered));
            ratios.push(Some(filt_std / raw_std));
        }
    }
    Ok(ratios)
}

/// std(estimate − truth)/std(measurement − truth) per observed component,
/// both evaluated in measurement space. The filtered error is reconstructed
/// from the recorded series: h(x̂) − h(truth) = raw error − post-fit
/// residual.
pub fn noise_reduction(record: &TrajectoryRecord) -> Result<Vec<f64>, MetricsError> {
    let ratios = noise_reduction_per_component(record)?;
    ratios
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or(MetricsError::DegenerateRawStd { component: i }))
        .collect()
}

/// Lag-1 autocorrelation of a scalar series (mean-removed).
pub fn lag1_autocorrelation(series: &[f64]) -> f64 {
    if series.len() < 2 {
        return 0.0;
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let denom: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = series
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum();
    num / denom
}

/// Assembles the full report for a filtered record. The chi-squared is
/// computed over the post-fit residuals (measured minus filtered data)
/// normalised by the measurement sigmas.
pub fn fit_report(record: &TrajectoryRecord, sigmas: &[f64]) -> Result<FitReport, MetricsError> {
    if record.estimates.len() != record.epochs() {
        return Err(MetricsError::MissingSeries { what: "estimates (run the filter first)" });
    }
    let (chi2, dof, reduced) = reduced_chi2(&record.postfit_residuals, sigmas)?;
    let n = record.truth[0].len();
    let mut rmse = Vec::with_capacity(n);
    for i in 0..n {
        let sumsq: f64 = record
            .estimates
            .iter()
            .zip(&record.truth)
            .map(|(e, t)| {
                let d = e.mean[i] - t[i];
                d * d
            })
            .sum();
        rmse.push((sumsq / record.epochs() as f64).sqrt());
    }
    // zero-noise runs have no raw spread; the undefined ratio becomes NaN
    // rather than failing the whole report
    let ratios = noise_reduction_per_component(record)?
        .into_iter()
        .map(|r| r.unwrap_or(f64::NAN))
        .collect();
    let k = record.measurements[0].len();
    let lag1 = (0..k)
        .map(|i| {
            let series: Vec<f64> = record.innovations.iter().map(|r| r[i]).collect();
            lag1_autocorrelation(&series)
        })
        .collect();
    Ok(FitReport {
        chi2,
        dof,
        reduced_chi2: reduced,
        rmse_per_component: rmse,
        noise_reduction_ratio: ratios,
        lag1_innovation: lag1,
    })
}
