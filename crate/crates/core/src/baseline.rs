//! Single-fit comparison methods: validation-tuned Lasso and L1-logistic, and
//! full least squares.

use serde::{Deserialize, Serialize};

use crate::data::{CoefficientVector, DataSet};
use crate::error::{Result, SolveError, UoiError};
use crate::solvers::{fit_ols, SolverOptions, Task};
use crate::support::Support;
use crate::uoi::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    pub coefficients: CoefficientVector,
    pub lambda: Option<f64>,
    pub grid_index: Option<usize>,
}

/// Penalized path on standardized training columns; the penalty with the
/// lowest mean loss on `validation` wins (ties to the larger penalty).
pub fn tuned_penalized_fit(
    train: &DataSet,
    validation: &DataSet,
    grid: &GridSpec,
    task: Task,
    opts: &SolverOptions,
) -> Result<BaselineFit> {
    if train.n_features() != validation.n_features() {
        return Err(UoiError::invalid("training and validation feature counts differ"));
    }
    let (work, map) = train.standardize();
    let grid = grid.resolve(&work, task)?;
    let path = crate::uoi::penalized_path(&work, grid.values(), None, task, opts);
    let mut best: Option<(usize, f64, CoefficientVector)> = None;
    for (j, fit) in path.into_iter().enumerate() {
        let fit = match fit {
            Ok(c) => c,
            Err(SolveError::NotConverged { last_iterate, .. }) => *last_iterate,
            Err(e) => return Err(e.into()),
        };
        let fit = map.to_original(&fit);
        let loss = crate::uoi::held_out_loss(validation, &fit, task);
        if best.as_ref().is_none_or(|(_, l, _)| loss < *l) {
            best = Some((j, loss, fit));
        }
    }
    let (j, _, coefficients) = best.expect("grid is non-empty");
    Ok(BaselineFit {
        coefficients,
        lambda: Some(grid.values()[j]),
        grid_index: Some(j),
    })
}

/// Least squares on every feature.
pub fn full_ols(train: &DataSet) -> Result<BaselineFit> {
    let p = train.n_features();
    let all = Support::new((0..p).collect(), p)?;
    Ok(BaselineFit {
        coefficients: fit_ols(train, &all, true)?,
        lambda: None,
        grid_index: None,
    })
}
