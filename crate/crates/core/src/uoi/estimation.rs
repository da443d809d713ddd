use nalgebra::DVector;
use rayon::prelude::*;

use crate::data::{CoefficientVector, DataSet};
use crate::error::{Result, SolveError};
use crate::resampling::{bootstrap_indices, domain};
use crate::solvers::{fit_ols, negative_log_likelihood, solve_logistic, Task};
use crate::support::{Support, SupportFamily};

use super::{FlaggedCell, ModelEstimate, UoIConfig};

/// Unpenalized refit restricted to `support`.
pub(crate) fn refit(
    data: &DataSet,
    support: &Support,
    task: Task,
    config: &UoIConfig,
) -> Result<CoefficientVector> {
    match task {
        Task::Regression => fit_ols(data, support, true),
        Task::Classification => {
            let p = data.n_features();
            let restricted = data.select_columns(support.indices());
            let fit = match solve_logistic(&restricted, 0.0, None, None, &config.solver) {
                Ok(s) => s.coefficients,
                // without a penalty near-separable samples need not converge;
                // the last iterate still scores on held-out rows
                Err(SolveError::NotConverged { last_iterate, .. }) => *last_iterate,
                Err(e) => return Err(e.into()),
            };
            let mut values = DVector::zeros(p);
            for (k, &j) in support.indices().iter().enumerate() {
                values[j] = fit.values[k];
            }
            Ok(CoefficientVector::new(values, fit.intercept))
        }
    }
}

/// Mean held-out loss: squared error for regression, negative log-likelihood
/// for classification.
pub(crate) fn held_out_loss(data: &DataSet, fit: &CoefficientVector, task: Task) -> f64 {
    let n = data.n_samples().max(1) as f64;
    let eta = fit.predict(data.features());
    let loss = match task {
        Task::Regression => (data.response() - eta).norm_squared(),
        Task::Classification => negative_log_likelihood(data.response(), &eta),
    } / n;
    if loss.is_nan() {
        f64::INFINITY
    } else {
        loss
    }
}

struct BootstrapChoice {
    fit: CoefficientVector,
    support: Support,
    loss: f64,
    grid_index: usize,
    flag: Option<FlaggedCell>,
}

fn estimate_one(
    data: &DataSet,
    unique: &[Support],
    slot: &[usize],
    config: &UoIConfig,
    task: Task,
    k: usize,
) -> Result<BootstrapChoice> {
    let n = data.n_samples();
    let plan = bootstrap_indices(n, config.seed.substream(domain::ESTIMATION, k as u64))?;
    let mut oob = plan.out_of_bag(n);
    let mut flag = None;
    if oob.is_empty() {
        oob = (0..n).collect();
        flag = Some(FlaggedCell {
            resample: k,
            grid_index: None,
            message: "bootstrap left no out-of-bag rows; scored on the training rows".into(),
        });
    }
    let train = data.select_rows(plan.indices());
    let eval = data.select_rows(&oob);

    let mut fits = Vec::with_capacity(unique.len());
    let mut losses = Vec::with_capacity(unique.len());
    for s in unique {
        let fit = refit(&train, s, task, config)?;
        losses.push(held_out_loss(&eval, &fit, task));
        fits.push(fit);
    }
    // lowest grid index wins ties, i.e. the sparsest end of the path; losses
    // closer than round-off of the response scale count as tied
    let tie = tie_tolerance(&eval, task);
    let mut best = 0;
    for j in 1..slot.len() {
        if losses[slot[j]] < losses[slot[best]] - tie {
            best = j;
        }
    }
    Ok(BootstrapChoice {
        fit: fits[slot[best]].clone(),
        support: unique[slot[best]].clone(),
        loss: losses[slot[best]],
        grid_index: best,
        flag,
    })
}

const RELATIVE_TIE: f64 = 1e-12;

fn tie_tolerance(eval: &DataSet, task: Task) -> f64 {
    match task {
        Task::Regression => {
            let y = eval.response();
            RELATIVE_TIE * y.norm_squared() / y.len().max(1) as f64
        }
        Task::Classification => RELATIVE_TIE,
    }
}

pub(crate) fn estimate_on_family(
    data: &DataSet,
    family: SupportFamily,
    config: &UoIConfig,
    task: Task,
) -> Result<ModelEstimate> {
    let p = data.n_features();
    let family = if family.is_empty() {
        SupportFamily {
            per_lambda: vec![Support::empty()],
        }
    } else {
        family
    };
    let degenerate = family.all_empty();
    let (unique, slot) = family.deduplicated();

    let choices: Vec<BootstrapChoice> = (0..config.b2)
        .into_par_iter()
        .map(|k| estimate_one(data, &unique, &slot, config, task, k))
        .collect::<Result<_>>()?;

    let mut sum = DVector::zeros(p);
    let mut intercept = 0.0;
    for c in &choices {
        sum += &c.fit.values;
        intercept += c.fit.intercept;
    }
    let b2 = config.b2 as f64;
    let coefficients = CoefficientVector::new(sum / b2, intercept / b2);
    let support = coefficients.support();

    let mut estimate = ModelEstimate {
        coefficients,
        support,
        per_bootstrap_supports: Vec::with_capacity(choices.len()),
        per_bootstrap_losses: Vec::with_capacity(choices.len()),
        per_bootstrap_choice: Vec::with_capacity(choices.len()),
        family,
        lambdas: Vec::new(),
        degenerate,
        flagged: Vec::new(),
    };
    for c in choices {
        estimate.per_bootstrap_supports.push(c.support);
        estimate.per_bootstrap_losses.push(c.loss);
        estimate.per_bootstrap_choice.push(c.grid_index);
        estimate.flagged.extend(c.flag);
    }
    Ok(estimate)
}

/// Union estimation: for each of `b2` bootstraps refit every candidate support,
/// keep the one with the lowest out-of-bag loss, then average the kept
/// estimates (zero outside their supports).
pub fn estimate_union(
    data: &DataSet,
    family: &SupportFamily,
    config: &UoIConfig,
    task: Task,
) -> Result<ModelEstimate> {
    config.validate()?;
    if let Some(bad) = family
        .per_lambda
        .iter()
        .flat_map(|s| s.indices())
        .find(|&&j| j >= data.n_features())
    {
        return Err(crate::error::UoiError::invalid(format!(
            "support index {bad} out of range for {} features",
            data.n_features()
        )));
    }
    estimate_on_family(data, family.clone(), config, task)
}
