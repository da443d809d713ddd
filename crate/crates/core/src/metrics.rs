//! Selection, estimation, prediction and parsimony metrics.

use serde::{Deserialize, Serialize};

use crate::data::CoefficientVector;
use crate::error::{Result, UoiError};
use crate::support::Support;

/// Residual mean-square floor used in the regression BIC.
pub const MSE_FLOOR: f64 = 1e-12;

/// Metrics for one fit. Fields are absent when their inputs are unavailable,
/// e.g. selection metrics without a known true support.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub selection_accuracy: Option<f64>,
    pub estimation_rms: Option<f64>,
    pub estimation_variance: Option<f64>,
    pub r_squared: Option<f64>,
    pub bic: Option<f64>,
    pub selection_ratio: Option<f64>,
    pub false_positives: Option<usize>,
    pub false_negatives: Option<usize>,
    /// Fraction of correctly classified held-out samples (classification only).
    pub accuracy: Option<f64>,
}

/// `1 - |S ^ S'| / (|S| + |S'|)`; two empty sets count as a perfect match.
pub fn selection_accuracy(true_support: &Support, est_support: &Support) -> f64 {
    let denom = true_support.len() + est_support.len();
    if denom == 0 {
        return 1.0;
    }
    1.0 - true_support.symmetric_difference_len(est_support) as f64 / denom as f64
}

pub fn estimation_rms(true_beta: &[f64], est_beta: &[f64]) -> Result<f64> {
    if true_beta.len() != est_beta.len() || true_beta.is_empty() {
        return Err(UoiError::invalid("coefficient vectors must be non-empty and of equal length"));
    }
    let ss: f64 = true_beta
        .iter()
        .zip(est_beta)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / true_beta.len() as f64).sqrt())
}

/// Per-coordinate population variance `E[b^2] - E[b]^2`, averaged over coordinates.
pub fn estimation_variance(estimates: &[CoefficientVector]) -> Result<f64> {
    if estimates.len() < 2 {
        return Err(UoiError::invalid("estimation variance needs at least two estimates"));
    }
    let p = estimates[0].len();
    if p == 0 || estimates.iter().any(|e| e.len() != p) {
        return Err(UoiError::invalid("estimates must share a non-zero length"));
    }
    let m = estimates.len() as f64;
    let mut total = 0.0;
    for j in 0..p {
        let (s, s2) = estimates
            .iter()
            .map(|e| e.values[j])
            .fold((0.0, 0.0), |(s, s2), v| (s + v, s2 + v * v));
        let mean = s / m;
        total += (s2 / m - mean * mean).max(0.0);
    }
    Ok(total / p as f64)
}

/// Coefficient of determination `1 - SSE / SST`.
pub fn r_squared(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(UoiError::invalid("response and prediction must be non-empty and of equal length"));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if sst == 0.0 {
        return Err(UoiError::invalid("R^2 undefined for a constant response"));
    }
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - sse / sst)
}

/// `n log(SSE / (n - 1)) + k log(n)`, with the mean square floored at [`MSE_FLOOR`].
pub fn bic_regression(y: &[f64], y_hat: &[f64], n: usize, nonzeros: usize) -> Result<f64> {
    if n < 2 {
        return Err(UoiError::invalid("BIC needs n >= 2"));
    }
    if y.len() != y_hat.len() {
        return Err(UoiError::invalid("response and prediction lengths differ"));
    }
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    let nf = n as f64;
    let mse = (sse / (nf - 1.0)).max(MSE_FLOOR);
    Ok(nf * mse.ln() + nonzeros as f64 * nf.ln())
}

/// `-2 log L + k log(n)`.
pub fn bic_classification(log_likelihood: f64, n: f64, nonzeros: usize) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(UoiError::invalid("BIC needs n >= 1"));
    }
    Ok(-2.0 * log_likelihood + nonzeros as f64 * n.ln())
}

/// Fraction of nonzero coefficients.
pub fn selection_ratio(est_beta: &[f64]) -> f64 {
    if est_beta.is_empty() {
        return 0.0;
    }
    est_beta.iter().filter(|v| **v != 0.0).count() as f64 / est_beta.len() as f64
}

/// `(false positives, false negatives)` of an estimated support.
pub fn confusion_counts(true_support: &Support, est_support: &Support) -> (usize, usize) {
    let shared = true_support.intersection(est_support).len();
    (est_support.len() - shared, true_support.len() - shared)
}
