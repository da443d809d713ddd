//! L1-penalized logistic regression by proximal gradient with backtracking.
//!
//! Objective: `sum_i [log(1 + e^eta_i) - y_i eta_i] + lambda * sum_j w_j |b_j|`
//! with `eta = X b + b0` and an unpenalized intercept `b0`.

use nalgebra::{DMatrix, DVector};

use crate::data::{CoefficientVector, DataSet};
use crate::error::SolveError;

use super::lasso::soft_threshold;
use super::SolverOptions;

const MIN_STEP: f64 = 1e-20;

#[derive(Debug, Clone)]
pub struct LogisticSolution {
    pub coefficients: CoefficientVector,
    pub iterations: usize,
    /// Infinity norm of the gradient mapping at the returned point.
    pub residual: f64,
    /// Penalized objective after each accepted step, only filled when requested.
    pub objective_trace: Vec<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let z = x.exp();
        z / (1.0 + z)
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Negative log-likelihood of a binary response under linear predictor `eta`.
pub fn negative_log_likelihood(y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    y.iter()
        .zip(eta.iter())
        .map(|(&yi, &e)| softplus(e) - yi * e)
        .sum()
}

/// Gradient of the negative log-likelihood in `(coefficients, intercept)`.
pub fn nll_gradient(x: &DMatrix<f64>, y: &DVector<f64>, eta: &DVector<f64>) -> (DVector<f64>, f64) {
    let resid = DVector::from_fn(y.len(), |i, _| sigmoid(eta[i]) - y[i]);
    (x.transpose() * &resid, resid.sum())
}

/// Penalty level above which the fit is intercept-only: `||X'(y - mean(y))||_inf`.
pub fn logistic_lambda_max(data: &DataSet) -> f64 {
    let y = data.response();
    let pi = y.mean();
    (data.features().transpose() * y.add_scalar(-pi)).amax()
}

pub(crate) fn check_binary(data: &DataSet) -> Result<(), SolveError> {
    if !data.is_binary() {
        return Err(SolveError::InvalidArgument(
            "logistic response must contain only 0 and 1".into(),
        ));
    }
    let ones = data.response().iter().filter(|v| **v == 1.0).count();
    if ones == 0 || ones == data.n_samples() {
        return Err(SolveError::InvalidArgument(
            "logistic response needs both classes present".into(),
        ));
    }
    Ok(())
}

pub fn fit_logistic_l1(
    data: &DataSet,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<CoefficientVector, SolveError> {
    solve_logistic(data, lambda, None, None, opts).map(|s| s.coefficients)
}

/// Full-control entry point: optional per-feature penalty weights and warm start.
pub fn solve_logistic(
    data: &DataSet,
    lambda: f64,
    weights: Option<&[f64]>,
    warm_start: Option<&CoefficientVector>,
    opts: &SolverOptions,
) -> Result<LogisticSolution, SolveError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(SolveError::InvalidArgument(format!(
            "logistic penalty must be nonnegative and finite, got {lambda}"
        )));
    }
    check_binary(data)?;
    let x = data.features();
    let y = data.response();
    let (n, p) = x.shape();
    if let Some(w) = weights {
        if w.len() != p || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(SolveError::InvalidArgument(
                "penalty weights must be finite, nonnegative and one per feature".into(),
            ));
        }
    }
    let pen: Vec<f64> = (0..p).map(|j| lambda * weights.map_or(1.0, |w| w[j])).collect();

    // The intercept is carried as `u = sqrt(n) * b0` so its curvature matches a
    // unit-norm column; the problem is unchanged because b0 is unpenalized.
    let root_n = (n as f64).sqrt();
    let (mut beta, mut u) = match warm_start {
        Some(w) if w.len() == p => (w.values.clone(), w.intercept * root_n),
        _ => {
            let pi = y.mean();
            (DVector::zeros(p), (pi / (1.0 - pi)).ln() * root_n)
        }
    };

    let eta_of = |b: &DVector<f64>, u: f64| {
        let mut e = x * b;
        e.add_scalar_mut(u / root_n);
        e
    };
    let penalty = |b: &DVector<f64>| -> f64 { b.iter().zip(&pen).map(|(v, w)| w * v.abs()).sum() };

    let mut eta = eta_of(&beta, u);
    let mut f = negative_log_likelihood(y, &eta);
    let mut step = 1.0;
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;

    for iter in 1..=opts.max_iter {
        let (g_beta, g_b0) = nll_gradient(x, y, &eta);
        let g_u = g_b0 / root_n;
        loop {
            let cand_beta = DVector::from_fn(p, |j, _| {
                soft_threshold(beta[j] - step * g_beta[j], step * pen[j])
            });
            let cand_u = u - step * g_u;
            let d_beta = &cand_beta - &beta;
            let d_u = cand_u - u;
            let cand_eta = eta_of(&cand_beta, cand_u);
            let cand_f = negative_log_likelihood(y, &cand_eta);
            let model = f
                + g_beta.dot(&d_beta)
                + g_u * d_u
                + (d_beta.norm_squared() + d_u * d_u) / (2.0 * step);
            if cand_f <= model + 1e-12 * f.abs().max(1.0) || step < MIN_STEP {
                residual = d_beta.amax().max(d_u.abs()) / step;
                beta = cand_beta;
                u = cand_u;
                eta = cand_eta;
                f = cand_f;
                if opts.record_objective {
                    trace.push(f + penalty(&beta));
                }
                break;
            }
            step *= 0.5;
        }
        if residual <= opts.tol {
            return Ok(LogisticSolution {
                coefficients: CoefficientVector::new(beta, u / root_n),
                iterations: iter,
                residual,
                objective_trace: trace,
            });
        }
    }
    Err(SolveError::NotConverged {
        last_iterate: Box::new(CoefficientVector::new(beta, u / root_n)),
        violation: residual,
        iterations: opts.max_iter,
    })
}
