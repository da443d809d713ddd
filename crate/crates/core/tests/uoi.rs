use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use uoi::metrics::{estimation_variance, selection_accuracy};
use uoi::resampling::{bootstrap_indices, domain};
use uoi::solvers::{
    fit_lasso, fit_ols, lasso_path, make_lambda_grid, negative_log_likelihood, solve_logistic,
    RegularizationGrid, SolverOptions, Task,
};
use uoi::synthetic::{generate, BetaDistribution, GeneratorSpec};
use uoi::uoi::{
    bootstrap_supports, estimate_union, run_uoi, select_bolasso, select_stability,
    stability_subsample_supports, GridSpec, UoIConfig,
};
use uoi::{CoefficientVector, DataSet, SeedSpec, Support, SupportFamily};

/// 50 x 10 noiseless design with beta = (2, -1.5, 0, 1, 0, ...).
fn noiseless() -> (DataSet, CoefficientVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = DMatrix::from_fn(50, 10, |_, _| rng.sample(StandardNormal));
    let mut beta = DVector::zeros(10);
    beta[0] = 2.0;
    beta[1] = -1.5;
    beta[3] = 1.0;
    let y = &x * &beta;
    (DataSet::new(x, y).unwrap(), CoefficientVector::new(beta, 0.0))
}

fn config(b1: usize, b2: usize, seed: u64) -> UoIConfig {
    UoIConfig {
        b1,
        b2,
        grid: GridSpec::Auto { size: 20, ratio: 1e-3 },
        seed: SeedSpec::new(seed),
        ..Default::default()
    }
}

fn grid_of(data: &DataSet, cfg: &UoIConfig) -> RegularizationGrid {
    cfg.grid.resolve(data, Task::Regression).unwrap()
}

#[test]
fn small_penalties_keep_the_true_support() {
    let (data, beta) = noiseless();
    let truth = beta.support();
    for b1 in [1, 5, 10] {
        let sel = select_bolasso(&data, &config(b1, 1, 3), Task::Regression).unwrap();
        let last = sel.family.per_lambda.last().unwrap();
        assert!(truth.is_subset(last), "b1 = {b1}: {last:?}");
    }
}

#[test]
fn single_bootstrap_family_is_that_lasso_path() {
    let (data, _) = noiseless();
    let cfg = config(1, 1, 4);
    let grid = grid_of(&data, &cfg);
    let sel = select_bolasso(&data, &cfg, Task::Regression).unwrap();
    let plan = bootstrap_indices(50, cfg.seed.substream(domain::SELECTION, 0)).unwrap();
    let sample = data.select_rows(plan.indices());
    let path = lasso_path(&sample, grid.values(), None, &cfg.solver);
    for (j, fit) in path.into_iter().enumerate() {
        assert_eq!(sel.family.per_lambda[j], fit.unwrap().support());
    }
}

#[test]
fn intersections_shrink_with_more_bootstraps_and_compress() {
    let spec = GeneratorSpec { n: 80, p: 15, k: 5, seed: SeedSpec::new(2), ..Default::default() };
    let data = generate(&spec).unwrap().data;
    let mut prev: Option<SupportFamily> = None;
    for b1 in [1, 3, 6, 12] {
        let cfg = config(b1, 1, 8);
        let sel = select_bolasso(&data, &cfg, Task::Regression).unwrap();
        let (per_boot, _) = bootstrap_supports(&data, &grid_of(&data, &cfg), &cfg, Task::Regression).unwrap();
        for (j, s) in sel.family.per_lambda.iter().enumerate() {
            for boot in &per_boot {
                assert!(s.is_subset(&boot[j]));
            }
            if let Some(p) = &prev {
                assert!(s.is_subset(&p.per_lambda[j]));
            }
        }
        prev = Some(sel.family);
    }
}

#[test]
fn stability_at_full_threshold_is_the_intersection() {
    let spec = GeneratorSpec { n: 60, p: 12, k: 4, seed: SeedSpec::new(5), ..Default::default() };
    let data = generate(&spec).unwrap().data;
    let cfg = UoIConfig { stability_pi_thr: 1.0, stability_subsamples: 15, ..config(1, 1, 6) };
    let sel = select_stability(&data, &cfg, Task::Regression).unwrap();
    let (subs, _) = stability_subsample_supports(&data, &grid_of(&data, &cfg), &cfg, Task::Regression).unwrap();
    for (j, s) in sel.family.per_lambda.iter().enumerate() {
        let column: Vec<Support> = subs.iter().map(|b| b[j].clone()).collect();
        assert_eq!(*s, uoi::support::intersect_supports(&column).unwrap());
    }
}

#[test]
fn stability_recovers_noiseless_support() {
    let (data, beta) = noiseless();
    let cfg = UoIConfig { stability_subsamples: 40, ..config(1, 1, 7) };
    let sel = select_stability(&data, &cfg, Task::Regression).unwrap();
    assert!(sel.family.per_lambda.contains(&beta.support()));
}

#[test]
fn single_support_single_bootstrap_is_ols_on_the_resample() {
    let (data, _) = noiseless();
    let noisy_y = data.response() + DVector::from_fn(50, |i, _| ((i * 7) % 5) as f64 * 0.1);
    let data = DataSet::new(data.features().clone(), noisy_y).unwrap();
    let s = Support::new(vec![0, 1, 2], 10).unwrap();
    let cfg = config(1, 1, 12);
    let est = estimate_union(&data, &SupportFamily { per_lambda: vec![s.clone()] }, &cfg, Task::Regression).unwrap();
    let plan = bootstrap_indices(50, cfg.seed.substream(domain::ESTIMATION, 0)).unwrap();
    let oracle = fit_ols(&data.select_rows(plan.indices()), &s, true).unwrap();
    assert_eq!(est.coefficients, oracle);

    // the same support offered at every grid value: plain average of B2 refits
    let cfg = config(1, 4, 12);
    let family = SupportFamily { per_lambda: vec![s.clone(); 3] };
    let est = estimate_union(&data, &family, &cfg, Task::Regression).unwrap();
    let mut avg = DVector::zeros(10);
    for k in 0..4 {
        let plan = bootstrap_indices(50, cfg.seed.substream(domain::ESTIMATION, k)).unwrap();
        avg += fit_ols(&data.select_rows(plan.indices()), &s, true).unwrap().values / 4.0;
    }
    assert!((est.coefficients.values - avg).amax() < 1e-12);
    assert!(est.support.is_subset(&s));
    assert!(est.per_bootstrap_choice.iter().all(|&j| j == 0));
}

#[test]
fn noiseless_pipeline_is_exact() {
    let (data, beta) = noiseless();
    let est = run_uoi(&data, &config(10, 5, 1), Task::Regression).unwrap();
    assert_eq!(selection_accuracy(&beta.support(), &est.support), 1.0);
    assert!((&est.coefficients.values - &beta.values).amax() <= 1e-6);
    assert!(est.coefficients.intercept.abs() <= 1e-6);
    assert!(!est.degenerate);
}

#[test]
fn one_bootstrap_one_penalty_is_lasso_then_refit() {
    let spec = GeneratorSpec { n: 60, p: 8, k: 3, seed: SeedSpec::new(9), ..Default::default() };
    let data = generate(&spec).unwrap().data;
    let lam = make_lambda_grid(&data, 10, 0.01, Task::Regression).unwrap().values()[4];
    let cfg = UoIConfig {
        grid: GridSpec::Fixed(RegularizationGrid::new(vec![lam]).unwrap()),
        standardize: false,
        ..config(1, 1, 10)
    };
    let est = run_uoi(&data, &cfg, Task::Regression).unwrap();
    let sel_plan = bootstrap_indices(60, cfg.seed.substream(domain::SELECTION, 0)).unwrap();
    let support = fit_lasso(&data.select_rows(sel_plan.indices()), lam, &cfg.solver).unwrap().support();
    let est_plan = bootstrap_indices(60, cfg.seed.substream(domain::ESTIMATION, 0)).unwrap();
    let oracle = fit_ols(&data.select_rows(est_plan.indices()), &support, true).unwrap();
    assert_eq!(est.coefficients, oracle);
}

#[test]
fn coefficients_vanish_outside_chosen_supports() {
    let spec = GeneratorSpec { n: 100, p: 20, k: 6, seed: SeedSpec::new(3), ..Default::default() };
    let data = generate(&spec).unwrap().data;
    let est = run_uoi(&data, &config(5, 6, 2), Task::Regression).unwrap();
    let union = est.per_bootstrap_supports.iter().fold(Support::empty(), |a, s| a.union(s));
    for j in 0..20 {
        if !union.contains(j) {
            assert_eq!(est.coefficients.values[j], 0.0);
        }
    }
    assert_eq!(est.support, union);
}

/// Best subset by BIC over all 16 supports of a 4-feature classification
/// problem, with unpenalized logistic fits.
fn best_subset_oracle(data: &DataSet) -> Support {
    let n = data.n_samples() as f64;
    let mut best = (f64::INFINITY, Support::empty());
    for mask in 0u32..16 {
        let cols: Vec<usize> = (0..4).filter(|j| mask & (1 << j) != 0).collect();
        let sub = data.select_columns(&cols);
        let fit = match solve_logistic(&sub, 0.0, None, None, &SolverOptions::default()) {
            Ok(s) => s.coefficients,
            Err(uoi::SolveError::NotConverged { last_iterate, .. }) => *last_iterate,
            Err(e) => panic!("{e}"),
        };
        let nll = negative_log_likelihood(sub.response(), &fit.predict(sub.features()));
        let bic = 2.0 * nll + cols.len() as f64 * n.ln();
        if bic < best.0 {
            best = (bic, Support::new(cols, 4).unwrap());
        }
    }
    best.1
}

#[test]
fn classification_selects_informative_features() {
    // linearly separated by x0 - x1, two pure-noise columns
    let mut agree = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(200, 4, |_, _| rng.sample(StandardNormal));
        let y = DVector::from_fn(200, |i, _| (x[(i, 0)] > x[(i, 1)]) as u8 as f64);
        let data = DataSet::new(x, y).unwrap();
        let oracle = best_subset_oracle(&data);
        assert_eq!(oracle.indices(), &[0, 1]);
        let est = run_uoi(&data, &config(10, 5, seed), Task::Classification).unwrap();
        agree += (est.support == oracle) as usize;
    }
    assert!(agree >= 9, "{agree} of 10");
}

#[test]
fn thread_count_does_not_change_the_estimate() {
    let spec = GeneratorSpec { n: 120, p: 25, k: 8, seed: SeedSpec::new(6), ..Default::default() };
    let data = generate(&spec).unwrap().data;
    let cfg = config(6, 6, 5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_uoi(&data, &cfg, Task::Regression).unwrap())
    };
    let one = run(1);
    let eight = run(8);
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&eight).unwrap());
}

#[test]
fn families_grow_toward_small_penalties_on_average() {
    let (mut head, mut tail) = (0usize, 0usize);
    for seed in 0..20 {
        let spec = GeneratorSpec { n: 100, p: 20, k: 6, seed: SeedSpec::new(seed), ..Default::default() };
        let data = generate(&spec).unwrap().data;
        let sel = select_bolasso(&data, &config(5, 1, seed), Task::Regression).unwrap();
        head += sel.family.per_lambda[0].len();
        tail += sel.family.per_lambda.last().unwrap().len();
    }
    assert!(head <= tail);
}

#[test]
fn more_estimation_bootstraps_reduce_variance() {
    let mut by_b2 = Vec::new();
    for b2 in [1, 20] {
        let estimates: Vec<CoefficientVector> = (0..20)
            .map(|seed| {
                let spec = GeneratorSpec {
                    n: 100,
                    p: 20,
                    k: 5,
                    distribution: BetaDistribution::Uniform,
                    noise_multiplier: 0.5,
                    seed: SeedSpec::new(1000),
                    ..Default::default()
                };
                // same coefficients, fresh design and noise per draw
                let beta = uoi::synthetic::generate_beta(&spec).unwrap();
                let draw = GeneratorSpec { seed: SeedSpec::new(seed), ..spec };
                let data = uoi::synthetic::generate_dataset(&draw, &beta).unwrap();
                run_uoi(&data, &config(5, b2, seed), Task::Regression).unwrap().coefficients
            })
            .collect();
        by_b2.push(estimation_variance(&estimates).unwrap());
    }
    assert!(by_b2[1] < by_b2[0], "{by_b2:?}");
}
