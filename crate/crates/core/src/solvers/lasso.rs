//! Cyclic coordinate descent for the un-normalized Lasso
//! `sum_i (y_i - x_i'b - b0)^2 + lambda * sum_j w_j |b_j|` with a free intercept.

use nalgebra::{DMatrix, DVector};

use crate::data::{CoefficientVector, DataSet};
use crate::error::SolveError;

use super::SolverOptions;

/// Centered copy of a data set, reusable across many penalty values.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    x_mean: DVector<f64>,
    y_mean: f64,
    col_sq: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub coefficients: CoefficientVector,
    pub sweeps: usize,
    pub kkt_violation: f64,
    /// Objective after each full sweep, only filled when requested.
    pub objective_trace: Vec<f64>,
}

impl LassoProblem {
    pub fn new(data: &DataSet) -> Self {
        let n = data.n_samples();
        let mut x = data.features().clone();
        let x_mean = if n > 0 {
            x.row_mean().transpose()
        } else {
            DVector::zeros(x.ncols())
        };
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col.add_scalar_mut(-x_mean[j]);
        }
        let y_mean = if n > 0 { data.response().mean() } else { 0.0 };
        let y = data.response().add_scalar(-y_mean);
        let col_sq = x.column_iter().map(|c| c.norm_squared()).collect();
        Self {
            x,
            y,
            x_mean,
            y_mean,
            col_sq,
        }
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// `2 * max_j |x_j'(y - mean(y))|`, the smallest penalty giving an all-zero fit.
    pub fn lambda_max(&self) -> f64 {
        // same per-column dot product the coordinate update uses, so that the
        // threshold is reproduced exactly
        2.0 * self
            .x
            .column_iter()
            .map(|c| c.dot(&self.y).abs())
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, beta: &DVector<f64>, lambda: f64, weights: Option<&[f64]>) -> f64 {
        let r = &self.y - &self.x * beta;
        r.norm_squared() + lambda * weighted_l1(beta, weights)
    }

    /// Solves at one penalty value. `weights` scales the penalty per feature;
    /// `warm_start` seeds the iterate.
    pub fn solve(
        &self,
        lambda: f64,
        weights: Option<&[f64]>,
        warm_start: Option<&DVector<f64>>,
        opts: &SolverOptions,
    ) -> Result<LassoSolution, SolveError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(SolveError::InvalidArgument(format!(
                "lasso penalty must be positive and finite, got {lambda}"
            )));
        }
        let p = self.n_features();
        if let Some(w) = weights {
            if w.len() != p || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(SolveError::InvalidArgument(
                    "penalty weights must be finite, nonnegative and one per feature".into(),
                ));
            }
        }
        let thresholds: Vec<f64> = (0..p)
            .map(|j| 0.5 * lambda * weights.map_or(1.0, |w| w[j]))
            .collect();

        let mut beta = match warm_start {
            Some(b) if b.len() == p => b.clone(),
            _ => DVector::zeros(p),
        };
        for j in 0..p {
            if self.col_sq[j] == 0.0 {
                beta[j] = 0.0;
            }
        }
        let mut resid = &self.y - &self.x * &beta;
        let mut trace = Vec::new();
        let all: Vec<usize> = (0..p).collect();
        let mut sweeps = 0;

        while sweeps < opts.max_iter {
            sweeps += 1;
            let change = self.sweep(&all, &thresholds, &mut beta, &mut resid);
            if opts.record_objective {
                trace.push(self.objective(&beta, lambda, weights));
            }
            if change <= opts.tol {
                // refresh the residual so the optimality check is not polluted
                // by accumulated update error
                resid = &self.y - &self.x * &beta;
                let violation = self.kkt_violation(&beta, &resid, &thresholds);
                if violation <= opts.tol {
                    return Ok(self.finish(beta, sweeps, violation, trace));
                }
                continue;
            }
            let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
            if active.len() < p {
                for _ in 0..opts.max_iter {
                    if self.sweep(&active, &thresholds, &mut beta, &mut resid) <= opts.tol {
                        break;
                    }
                }
            }
        }
        resid = &self.y - &self.x * &beta;
        let violation = self.kkt_violation(&beta, &resid, &thresholds);
        Err(SolveError::NotConverged {
            last_iterate: Box::new(self.coefficients(beta)),
            violation,
            iterations: sweeps,
        })
    }

    fn sweep(
        &self,
        coords: &[usize],
        thresholds: &[f64],
        beta: &mut DVector<f64>,
        resid: &mut DVector<f64>,
    ) -> f64 {
        let mut max_change = 0.0f64;
        for &j in coords {
            let sq = self.col_sq[j];
            if sq == 0.0 {
                continue;
            }
            let col = self.x.column(j);
            let old = beta[j];
            let rho = col.dot(resid) + sq * old;
            let new = soft_threshold(rho, thresholds[j]) / sq;
            if new != old {
                resid.axpy(old - new, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        max_change
    }

    /// Largest violation of the subgradient optimality conditions.
    pub fn kkt_violation(
        &self,
        beta: &DVector<f64>,
        resid: &DVector<f64>,
        thresholds: &[f64],
    ) -> f64 {
        let grad = self.x.transpose() * resid * 2.0;
        (0..beta.len())
            .map(|j| {
                let pen = 2.0 * thresholds[j];
                if beta[j] != 0.0 {
                    (-grad[j] + pen * beta[j].signum()).abs()
                } else {
                    (grad[j].abs() - pen).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    fn coefficients(&self, beta: DVector<f64>) -> CoefficientVector {
        let intercept = self.y_mean - self.x_mean.dot(&beta);
        CoefficientVector::new(beta, intercept)
    }

    fn finish(
        &self,
        beta: DVector<f64>,
        sweeps: usize,
        violation: f64,
        trace: Vec<f64>,
    ) -> LassoSolution {
        LassoSolution {
            coefficients: self.coefficients(beta),
            sweeps,
            kkt_violation: violation,
            objective_trace: trace,
        }
    }
}

fn weighted_l1(beta: &DVector<f64>, weights: Option<&[f64]>) -> f64 {
    match weights {
        Some(w) => beta.iter().zip(w).map(|(b, w)| w * b.abs()).sum(),
        None => beta.lp_norm(1),
    }
}

#[inline]
pub(crate) fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Lasso fit at a single penalty value.
pub fn fit_lasso(
    data: &DataSet,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<CoefficientVector, SolveError> {
    LassoProblem::new(data)
        .solve(lambda, None, None, opts)
        .map(|s| s.coefficients)
}

/// Warm-started fits along a decreasing penalty sequence. Each entry is the
/// outcome at the matching penalty; a failed entry does not stop the path.
pub fn lasso_path(
    data: &DataSet,
    lambdas: &[f64],
    weights: Option<&[f64]>,
    opts: &SolverOptions,
) -> Vec<Result<CoefficientVector, SolveError>> {
    let problem = LassoProblem::new(data);
    let mut warm: Option<DVector<f64>> = None;
    lambdas
        .iter()
        .map(|&lambda| {
            let out = problem.solve(lambda, weights, warm.as_ref(), opts);
            match &out {
                Ok(sol) => warm = Some(sol.coefficients.values.clone()),
                Err(SolveError::NotConverged { last_iterate, .. }) => {
                    warm = Some(last_iterate.values.clone())
                }
                Err(_) => {}
            }
            out.map(|s| s.coefficients)
        })
        .collect()
}
