use rand::Rng;
use rayon::prelude::*;

use crate::data::{CoefficientVector, DataSet};
use crate::error::{Result, SolveError};
use crate::resampling::{bootstrap_indices, domain, half_subsample};
use crate::solvers::{lasso_path, solve_logistic, RegularizationGrid, SolverOptions, Task};
use crate::support::{intersect_supports, Support, SupportFamily};

use super::{FlaggedCell, Selection, SelectionVariant, UoIConfig};

/// Penalized fits along the grid, warm-started from the previous value.
pub(crate) fn penalized_path(
    data: &DataSet,
    lambdas: &[f64],
    weights: Option<&[f64]>,
    task: Task,
    opts: &SolverOptions,
) -> Vec<std::result::Result<CoefficientVector, SolveError>> {
    match task {
        Task::Regression => lasso_path(data, lambdas, weights, opts),
        Task::Classification => {
            let mut warm: Option<CoefficientVector> = None;
            lambdas
                .iter()
                .map(|&lam| {
                    let out = solve_logistic(data, lam, weights, warm.as_ref(), opts);
                    match &out {
                        Ok(s) => warm = Some(s.coefficients.clone()),
                        Err(SolveError::NotConverged { last_iterate, .. }) => {
                            warm = Some((**last_iterate).clone())
                        }
                        Err(_) => {}
                    }
                    out.map(|s| s.coefficients)
                })
                .collect()
        }
    }
}

/// Supports along the grid for one resample; failed cells become empty and flagged.
fn path_supports(
    data: &DataSet,
    lambdas: &[f64],
    weights: Option<&[f64]>,
    task: Task,
    opts: &SolverOptions,
    resample: usize,
) -> (Vec<Support>, Vec<FlaggedCell>) {
    let mut flagged = Vec::new();
    let supports = penalized_path(data, lambdas, weights, task, opts)
        .into_iter()
        .enumerate()
        .map(|(j, fit)| match fit {
            Ok(c) => c.support(),
            Err(e) => {
                flagged.push(FlaggedCell {
                    resample,
                    grid_index: Some(j),
                    message: e.to_string(),
                });
                Support::empty()
            }
        })
        .collect();
    (supports, flagged)
}

/// Per-bootstrap, per-penalty supports of the selection stage: entry `[k][j]`
/// is the support of the penalized fit on bootstrap `k` at grid value `j`.
pub fn bootstrap_supports(
    data: &DataSet,
    grid: &RegularizationGrid,
    config: &UoIConfig,
    task: Task,
) -> Result<(Vec<Vec<Support>>, Vec<FlaggedCell>)> {
    let n = data.n_samples();
    let per_boot: Vec<_> = (0..config.b1)
        .into_par_iter()
        .map(|k| -> Result<_> {
            let plan = bootstrap_indices(n, config.seed.substream(domain::SELECTION, k as u64))?;
            let sample = data.select_rows(plan.indices());
            Ok(path_supports(&sample, grid.values(), None, task, &config.solver, k))
        })
        .collect::<Result<_>>()?;
    Ok(unzip_flagged(per_boot))
}

/// Per-subsample supports under randomized penalties for stability selection.
pub fn stability_subsample_supports(
    data: &DataSet,
    grid: &RegularizationGrid,
    config: &UoIConfig,
    task: Task,
) -> Result<(Vec<Vec<Support>>, Vec<FlaggedCell>)> {
    let n = data.n_samples();
    let p = data.n_features();
    let alpha = config.stability_alpha;
    let per_sub: Vec<_> = (0..config.stability_subsamples)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let seed = config.seed.substream(domain::STABILITY, i as u64);
            let plan = half_subsample(n, seed)?;
            let sample = data.select_rows(plan.indices());
            // weights come from a sibling stream so the subsample itself is
            // unaffected by p
            let mut rng = seed.substream(domain::STABILITY, u64::MAX).rng();
            let weights: Vec<f64> = (0..p)
                .map(|_| if alpha < 1.0 { rng.random_range(alpha..=1.0) } else { 1.0 })
                .collect();
            Ok(path_supports(&sample, grid.values(), Some(&weights), task, &config.solver, i))
        })
        .collect::<Result<_>>()?;
    Ok(unzip_flagged(per_sub))
}

fn unzip_flagged(
    parts: Vec<(Vec<Support>, Vec<FlaggedCell>)>,
) -> (Vec<Vec<Support>>, Vec<FlaggedCell>) {
    let mut supports = Vec::with_capacity(parts.len());
    let mut flagged = Vec::new();
    for (s, f) in parts {
        supports.push(s);
        flagged.extend(f);
    }
    (supports, flagged)
}

pub(crate) fn select_bolasso_on_grid(
    data: &DataSet,
    grid: &RegularizationGrid,
    config: &UoIConfig,
    task: Task,
) -> Result<Selection> {
    let (per_boot, flagged) = bootstrap_supports(data, grid, config, task)?;
    let per_lambda = (0..grid.len())
        .map(|j| {
            let column: Vec<Support> = per_boot.iter().map(|b| b[j].clone()).collect();
            intersect_supports(&column)
        })
        .collect::<Result<_>>()?;
    Ok(Selection {
        family: SupportFamily { per_lambda },
        flagged,
    })
}

pub(crate) fn select_stability_on_grid(
    data: &DataSet,
    grid: &RegularizationGrid,
    config: &UoIConfig,
    task: Task,
) -> Result<Selection> {
    let (per_sub, flagged) = stability_subsample_supports(data, grid, config, task)?;
    let p = data.n_features();
    let total = per_sub.len() as f64;
    let threshold = config.stability_pi_thr * total;
    let per_lambda = (0..grid.len())
        .map(|j| {
            let mut counts = vec![0usize; p];
            for sub in &per_sub {
                for &f in sub[j].indices() {
                    counts[f] += 1;
                }
            }
            counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0 && c as f64 >= threshold - 1e-9)
                .map(|(f, _)| f)
                .collect()
        })
        .collect();
    Ok(Selection {
        family: SupportFamily { per_lambda },
        flagged,
    })
}

/// BoLasso selection: per penalty value, the intersection of the supports
/// found on `b1` bootstrap resamples.
pub fn select_bolasso(data: &DataSet, config: &UoIConfig, task: Task) -> Result<Selection> {
    config.validate()?;
    let grid = config.grid.resolve(data, task)?;
    select_bolasso_on_grid(data, &grid, config, task)
}

/// Stability selection: per penalty value, features chosen in at least a
/// `stability_pi_thr` fraction of randomized-penalty half-subsample fits.
pub fn select_stability(data: &DataSet, config: &UoIConfig, task: Task) -> Result<Selection> {
    let mut cfg = config.clone();
    cfg.selection_variant = SelectionVariant::Stability;
    cfg.validate()?;
    let grid = cfg.grid.resolve(data, task)?;
    select_stability_on_grid(data, &grid, &cfg, task)
}
