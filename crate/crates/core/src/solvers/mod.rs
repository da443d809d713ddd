//! Convex base learners: Lasso, least squares and L1-logistic regression.

mod grid;
mod lasso;
pub(crate) mod logistic;
mod ols;

use serde::{Deserialize, Serialize};

pub use grid::{make_lambda_grid, RegularizationGrid};
pub use lasso::{fit_lasso, lasso_path, LassoProblem, LassoSolution};
pub use logistic::{
    fit_logistic_l1, logistic_lambda_max, negative_log_likelihood, nll_gradient, sigmoid,
    solve_logistic, LogisticSolution,
};
pub use ols::fit_ols;

/// Regression (squared error) or binary classification (logistic loss).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence tolerance on coefficient change and optimality violation.
    pub tol: f64,
    /// Sweep (Lasso) or step (logistic) budget.
    pub max_iter: usize,
    #[serde(skip)]
    pub record_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 10_000,
            record_objective: false,
        }
    }
}
