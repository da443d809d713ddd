use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use uoi::solvers::{
    fit_lasso, fit_logistic_l1, fit_ols, lasso_path, logistic_lambda_max, make_lambda_grid,
    negative_log_likelihood, nll_gradient, sigmoid, LassoProblem, SolverOptions, Task,
};
use uoi::{CoefficientVector, DataSet, Support};

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn regression(n: usize, p: usize, seed: u64) -> DataSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(n, p, &mut rng);
    let beta = DVector::from_fn(p, |j, _| if j % 2 == 0 { 1.5 } else { 0.0 });
    let noise = DVector::from_fn(n, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
    let y = &x * beta + noise;
    DataSet::new(x, y).unwrap()
}

/// Subgradient conditions of sum (y - X b - b0)^2 + lambda |b|_1 written out
/// directly from the residual.
fn kkt_gap(data: &DataSet, fit: &CoefficientVector, lambda: f64) -> f64 {
    let r = data.response() - fit.predict(data.features());
    let mut worst = 2.0 * r.sum().abs();
    for j in 0..data.n_features() {
        let g = 2.0 * data.features().column(j).dot(&r);
        let b = fit.values[j];
        let v = if b != 0.0 {
            (g - lambda * b.signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

fn centered(data: &DataSet, cols: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let x = data.features().select_columns(cols.iter());
    let mut xc = x.clone();
    for mut c in xc.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
    let y = data.response();
    (xc, y.add_scalar(-y.mean()))
}

#[test]
fn lasso_satisfies_kkt_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..40 {
        let p = rng.random_range(1..=10);
        let n = rng.random_range(5..=50);
        let data = regression(n, p, 1000 + trial);
        let lam_max = LassoProblem::new(&data).lambda_max();
        let lambda = lam_max * rng.random_range(0.01..1.2);
        let fit = fit_lasso(&data, lambda, &SolverOptions::default()).unwrap();
        let gap = kkt_gap(&data, &fit, lambda);
        assert!(gap <= 1e-6, "trial {trial}: KKT gap {gap}");
    }
}

#[test]
fn ols_matches_normal_equations() {
    for seed in 0..10 {
        let data = regression(20, 5, seed);
        let all: Vec<usize> = (0..5).collect();
        let fit = fit_ols(&data, &Support::new(all.clone(), 5).unwrap(), true).unwrap();
        let (xc, yc) = centered(&data, &all);
        let gram = xc.transpose() * &xc;
        let oracle = gram.cholesky().unwrap().solve(&(xc.transpose() * yc));
        for j in 0..5 {
            assert!((fit.values[j] - oracle[j]).abs() < 1e-8);
        }
        let x_mean = data.features().row_mean();
        let b0 = data.response().mean() - (x_mean * &oracle)[0];
        assert!((fit.intercept - b0).abs() < 1e-8);
    }
}

#[test]
fn ols_rank_deficient_matches_eigen_pseudo_inverse() {
    let base = regression(15, 4, 5);
    let mut x = base.features().clone().insert_column(4, 0.0);
    let dup = x.column(1) * 2.0;
    x.set_column(4, &dup);
    let data = DataSet::new(x, base.response().clone()).unwrap();
    let all: Vec<usize> = (0..5).collect();
    let fit = fit_ols(&data, &Support::new(all.clone(), 5).unwrap(), true).unwrap();

    let (xc, yc) = centered(&data, &all);
    let eig = SymmetricEigen::new(xc.transpose() * &xc);
    let top = eig.eigenvalues.amax();
    let mut pinv = DMatrix::zeros(5, 5);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 1e-10 * top {
            let v = eig.eigenvectors.column(i);
            pinv += v * v.transpose() / l;
        }
    }
    let oracle = pinv * (xc.transpose() * yc);
    for j in 0..5 {
        assert!((fit.values[j] - oracle[j]).abs() < 1e-8, "{j}: {} vs {}", fit.values[j], oracle[j]);
    }
}

#[test]
fn ols_residual_is_orthogonal_to_support() {
    let data = regression(30, 8, 3);
    let s = Support::new(vec![0, 2, 5], 8).unwrap();
    let fit = fit_ols(&data, &s, true).unwrap();
    let r = data.response() - fit.predict(data.features());
    for &j in s.indices() {
        assert!(data.features().column(j).dot(&r).abs() < 1e-8);
    }
    assert!(r.sum().abs() < 1e-8);
}

#[test]
fn lasso_path_extremes() {
    let data = regression(40, 6, 9);
    let grid = make_lambda_grid(&data, 20, 1e-6, Task::Regression).unwrap();
    let path = lasso_path(&data, grid.values(), None, &SolverOptions::default());
    assert_eq!(path[0].as_ref().unwrap().nonzero_count(), 0);
    assert_eq!(path.last().unwrap().as_ref().unwrap().nonzero_count(), 6);
}

#[test]
fn logistic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = gaussian(10, 4, &mut rng);
    let y = DVector::from_fn(10, |i, _| (i % 3 == 0) as u8 as f64);
    let beta = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
    let b0 = 0.3;
    let nll = |b: &DVector<f64>, b0: f64| negative_log_likelihood(&y, &(&x * b).add_scalar(b0));
    let eta = (&x * &beta).add_scalar(b0);
    let (g, g0) = nll_gradient(&x, &y, &eta);
    let h = 1e-6;
    for j in 0..4 {
        let mut up = beta.clone();
        let mut dn = beta.clone();
        up[j] += h;
        dn[j] -= h;
        let fd = (nll(&up, b0) - nll(&dn, b0)) / (2.0 * h);
        assert!((fd - g[j]).abs() <= 1e-5 * fd.abs().max(1.0), "{j}: {fd} vs {}", g[j]);
    }
    let fd0 = (nll(&beta, b0 + h) - nll(&beta, b0 - h)) / (2.0 * h);
    assert!((fd0 - g0).abs() <= 1e-5 * fd0.abs().max(1.0));
}

#[test]
fn logistic_above_threshold_is_proximal_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = gaussian(60, 5, &mut rng);
    let y = DVector::from_fn(60, |i, _| {
        let t = x[(i, 0)] + 0.5 * rng.sample::<f64, _>(StandardNormal);
        (t > 0.0) as u8 as f64
    });
    let data = DataSet::new(x.clone(), y.clone()).unwrap();
    // intercept-only optimum, gradient there, threshold from that gradient
    let ybar = y.mean();
    let b0 = (ybar / (1.0 - ybar)).ln();
    let (g, _) = nll_gradient(&x, &y, &DVector::from_element(60, b0));
    let lam = g.amax();
    assert!((lam - logistic_lambda_max(&data)).abs() < 1e-10 * lam);
    let fit = fit_logistic_l1(&data, lam * 1.0001, &SolverOptions::default()).unwrap();
    assert_eq!(fit.nonzero_count(), 0);
    assert!((fit.intercept - b0).abs() < 1e-5);
    assert!((sigmoid(fit.intercept) - ybar).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solvers_are_deterministic(seed in 0u64..1000, frac in 0.05f64..0.9) {
        let data = regression(25, 5, seed);
        let lam = LassoProblem::new(&data).lambda_max() * frac;
        let a = fit_lasso(&data, lam, &SolverOptions::default()).unwrap();
        let b = fit_lasso(&data, lam, &SolverOptions::default()).unwrap();
        prop_assert_eq!(a.values.as_slice(), b.values.as_slice());
        prop_assert_eq!(a.intercept.to_bits(), b.intercept.to_bits());
    }

    #[test]
    fn lasso_objective_never_increases(seed in 0u64..1000, frac in 0.01f64..0.9) {
        let data = regression(20, 6, seed);
        let problem = LassoProblem::new(&data);
        let lam = problem.lambda_max() * frac;
        let opts = SolverOptions { record_objective: true, ..Default::default() };
        let sol = problem.solve(lam, None, None, &opts).unwrap();
        for w in sol.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
    }
}
