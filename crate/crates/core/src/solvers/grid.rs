use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::error::{Result, UoiError};

use super::logistic::logistic_lambda_max;
use super::{LassoProblem, Task};

/// Strictly decreasing, strictly positive penalty values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RegularizationGrid(Vec<f64>);

impl RegularizationGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(UoiError::invalid("regularization grid must not be empty"));
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(UoiError::invalid("regularization values must be positive and finite"));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(UoiError::invalid("regularization grid must be strictly decreasing"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for RegularizationGrid {
    type Error = UoiError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RegularizationGrid> for Vec<f64> {
    fn from(g: RegularizationGrid) -> Self {
        g.0
    }
}

/// `q` log-spaced penalties from the all-zero threshold down to `ratio` times it.
pub fn make_lambda_grid(data: &DataSet, q: usize, ratio: f64, task: Task) -> Result<RegularizationGrid> {
    if q == 0 {
        return Err(UoiError::invalid("grid size must be at least 1"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(UoiError::invalid(format!("grid ratio must lie in (0, 1), got {ratio}")));
    }
    let lambda_max = match task {
        Task::Regression => LassoProblem::new(data).lambda_max(),
        Task::Classification => logistic_lambda_max(data),
    };
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(UoiError::invalid(
            "degenerate penalty scale: response is constant or uncorrelated with every feature",
        ));
    }
    if q == 1 {
        return RegularizationGrid::new(vec![lambda_max]);
    }
    let log_ratio = ratio.ln();
    let values = (0..q)
        .map(|i| lambda_max * (log_ratio * i as f64 / (q - 1) as f64).exp())
        .collect();
    RegularizationGrid::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{fit_lasso, SolverOptions};
    use nalgebra::{DMatrix, DVector};

    fn data() -> DataSet {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, -1.0, 2.0, 0.3, -0.7, 2.0, 0.1]);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        DataSet::new(x, y).unwrap()
    }

    #[test]
    fn single_value_grid() {
        let g = make_lambda_grid(&data(), 1, 0.1, Task::Regression).unwrap();
        assert_eq!(g.values(), &[LassoProblem::new(&data()).lambda_max()]);
    }

    #[test]
    fn three_point_log_spacing() {
        let g = make_lambda_grid(&data(), 3, 0.01, Task::Regression).unwrap();
        let m = g.values()[0];
        assert!((g.values()[1] - 0.1 * m).abs() < 1e-12 * m);
        assert!((g.values()[2] - 0.01 * m).abs() < 1e-12 * m);
    }

    #[test]
    fn head_gives_empty_fit() {
        let d = data();
        let g = make_lambda_grid(&d, 5, 0.001, Task::Regression).unwrap();
        let fit = fit_lasso(&d, g.values()[0], &SolverOptions::default()).unwrap();
        assert_eq!(fit.nonzero_count(), 0);
    }

    #[test]
    fn constant_response_rejected() {
        let d = DataSet::new(DMatrix::from_element(3, 2, 1.5), DVector::from_element(3, 2.0)).unwrap();
        assert!(make_lambda_grid(&d, 4, 0.1, Task::Regression).is_err());
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(RegularizationGrid::new(vec![]).is_err());
        assert!(RegularizationGrid::new(vec![1.0, 1.0]).is_err());
        assert!(RegularizationGrid::new(vec![1.0, -0.5]).is_err());
        assert!(RegularizationGrid::new(vec![2.0, 1.0]).is_ok());
        assert!(make_lambda_grid(&data(), 0, 0.1, Task::Regression).is_err());
        assert!(make_lambda_grid(&data(), 3, 1.0, Task::Regression).is_err());
    }
}
