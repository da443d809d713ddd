//! Union of Intersections: intersect bootstrap supports per penalty value,
//! then average the best per-bootstrap refits.

mod estimation;
mod selection;

use serde::{Deserialize, Serialize};

use crate::data::{CoefficientVector, DataSet};
use crate::error::{Result, UoiError};
use crate::resampling::SeedSpec;
use crate::solvers::{make_lambda_grid, RegularizationGrid, SolverOptions, Task};
use crate::support::{Support, SupportFamily};

pub use estimation::estimate_union;
pub(crate) use estimation::held_out_loss;
pub(crate) use selection::penalized_path;
pub use selection::{bootstrap_supports, select_bolasso, select_stability, stability_subsample_supports};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionVariant {
    Bolasso,
    Stability,
}

/// Where the penalty values come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSpec {
    /// Log-spaced from the data's all-zero threshold down to `ratio` of it.
    Auto { size: usize, ratio: f64 },
    Fixed(RegularizationGrid),
}

impl GridSpec {
    pub fn resolve(&self, data: &DataSet, task: Task) -> Result<RegularizationGrid> {
        match self {
            GridSpec::Auto { size, ratio } => make_lambda_grid(data, *size, *ratio, task),
            GridSpec::Fixed(g) => Ok(g.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UoIConfig {
    /// Selection bootstraps.
    pub b1: usize,
    /// Estimation bootstraps.
    pub b2: usize,
    pub grid: GridSpec,
    pub seed: SeedSpec,
    pub selection_variant: SelectionVariant,
    /// Lower end of the randomized-penalty weights, in (0, 1].
    pub stability_alpha: f64,
    /// Selection-frequency threshold, in (0, 1].
    pub stability_pi_thr: f64,
    pub stability_subsamples: usize,
    /// Fit on unit-norm centered columns and report on the original scale.
    pub standardize: bool,
    pub solver: SolverOptions,
}

impl Default for UoIConfig {
    fn default() -> Self {
        Self {
            b1: 20,
            b2: 10,
            grid: GridSpec::Auto {
                size: 48,
                ratio: 1e-3,
            },
            seed: SeedSpec::new(0),
            selection_variant: SelectionVariant::Bolasso,
            stability_alpha: 0.5,
            stability_pi_thr: 0.75,
            stability_subsamples: 100,
            standardize: true,
            solver: SolverOptions::default(),
        }
    }
}

impl UoIConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b1 == 0 || self.b2 == 0 {
            return Err(UoiError::invalid("b1 and b2 must be at least 1"));
        }
        if let GridSpec::Auto { size, ratio } = self.grid {
            if size == 0 || !(ratio > 0.0 && ratio < 1.0) {
                return Err(UoiError::invalid("grid size must be >= 1 and ratio in (0, 1)"));
            }
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(UoiError::invalid("solver tolerance and iteration budget must be positive"));
        }
        if self.selection_variant == SelectionVariant::Stability {
            let in_unit = |v: f64| v > 0.0 && v <= 1.0;
            if !in_unit(self.stability_alpha) {
                return Err(UoiError::invalid("stability alpha must lie in (0, 1]"));
            }
            if !in_unit(self.stability_pi_thr) {
                return Err(UoiError::invalid("stability threshold must lie in (0, 1]"));
            }
            if self.stability_subsamples == 0 {
                return Err(UoiError::invalid("stability selection needs at least one subsample"));
            }
        }
        Ok(())
    }
}

/// A (bootstrap, grid index) cell whose fit failed and contributed the empty set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedCell {
    pub resample: usize,
    pub grid_index: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub family: SupportFamily,
    pub flagged: Vec<FlaggedCell>,
}

/// Bagged estimate plus per-bootstrap provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEstimate {
    pub coefficients: CoefficientVector,
    pub support: Support,
    pub per_bootstrap_supports: Vec<Support>,
    pub per_bootstrap_losses: Vec<f64>,
    /// Grid index whose support won each estimation bootstrap.
    pub per_bootstrap_choice: Vec<usize>,
    pub family: SupportFamily,
    pub lambdas: Vec<f64>,
    /// Every candidate support was empty.
    pub degenerate: bool,
    pub flagged: Vec<FlaggedCell>,
}

/// Full pipeline: selection (BoLasso or stability) followed by union estimation.
pub fn run_uoi(data: &DataSet, config: &UoIConfig, task: Task) -> Result<ModelEstimate> {
    config.validate()?;
    if task == Task::Classification {
        crate::solvers::logistic::check_binary(data)?;
    }
    let (work, map) = if config.standardize {
        let (d, m) = data.standardize();
        (d, Some(m))
    } else {
        (data.clone(), None)
    };
    let grid = config.grid.resolve(&work, task)?;
    let selection = match config.selection_variant {
        SelectionVariant::Bolasso => selection::select_bolasso_on_grid(&work, &grid, config, task)?,
        SelectionVariant::Stability => selection::select_stability_on_grid(&work, &grid, config, task)?,
    };
    let mut estimate = estimation::estimate_on_family(&work, selection.family, config, task)?;
    estimate.lambdas = grid.values().to_vec();
    estimate.flagged.splice(0..0, selection.flagged);
    if let Some(m) = map {
        estimate.coefficients = m.to_original(&estimate.coefficients);
        estimate.support = estimate.coefficients.support();
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn line_data() -> DataSet {
        let x = DMatrix::from_fn(30, 3, |i, j| ((i * (j + 2)) % 7) as f64 - 3.0);
        let y = DVector::from_fn(30, |i, _| 2.0 * x[(i, 0)] + 1.0);
        DataSet::new(x, y).unwrap()
    }

    #[test]
    fn rejects_bad_configs() {
        let ok = UoIConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            UoIConfig { b1: 0, ..ok.clone() },
            UoIConfig { b2: 0, ..ok.clone() },
            UoIConfig { grid: GridSpec::Auto { size: 0, ratio: 0.1 }, ..ok.clone() },
            UoIConfig { grid: GridSpec::Auto { size: 5, ratio: 1.0 }, ..ok.clone() },
            UoIConfig { grid: GridSpec::Auto { size: 5, ratio: f64::NAN }, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(UoiError::InvalidArgument(_))), "{bad:?}");
        }
    }

    #[test]
    fn stability_parameters_checked_only_for_stability() {
        let loose = UoIConfig { stability_alpha: 0.0, stability_pi_thr: 2.0, ..Default::default() };
        assert!(loose.validate().is_ok());
        let strict = UoIConfig { selection_variant: SelectionVariant::Stability, ..loose.clone() };
        assert!(strict.validate().is_err());
        let fixed = UoIConfig { stability_alpha: 1.0, stability_pi_thr: 1.0, ..strict };
        assert!(fixed.validate().is_ok());
    }

    #[test]
    fn empty_family_gives_intercept_only_estimate() {
        let data = line_data();
        let family = SupportFamily { per_lambda: vec![Support::empty(); 4] };
        let cfg = UoIConfig { b2: 3, ..Default::default() };
        let est = estimate_union(&data, &family, &cfg, Task::Regression).unwrap();
        assert!(est.degenerate);
        assert!(est.support.is_empty());
        assert_eq!(est.per_bootstrap_supports.len(), 3);
        assert!(est.coefficients.intercept.is_finite());
    }

    #[test]
    fn out_of_range_family_is_rejected() {
        let family = SupportFamily { per_lambda: vec![Support::new(vec![5], 6).unwrap()] };
        let err = estimate_union(&line_data(), &family, &UoIConfig::default(), Task::Regression);
        assert!(matches!(err, Err(UoiError::InvalidArgument(_))));
    }

    #[test]
    fn classification_needs_binary_response() {
        assert!(run_uoi(&line_data(), &UoIConfig::default(), Task::Classification).is_err());
    }
}
