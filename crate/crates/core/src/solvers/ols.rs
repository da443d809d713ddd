use nalgebra::{DMatrix, DVector};

use crate::data::{CoefficientVector, DataSet};
use crate::error::{Result, UoiError};
use crate::support::Support;

/// Least squares restricted to the columns in `support`.
///
/// Rank-deficient restrictions get the minimum-norm solution. Coefficients
/// outside the support are exactly zero, and an empty support gives the
/// mean predictor (or the zero predictor without intercept).
pub fn fit_ols(data: &DataSet, support: &Support, intercept: bool) -> Result<CoefficientVector> {
    let p = data.n_features();
    let n = data.n_samples();
    if let Some(&bad) = support.indices().iter().find(|&&j| j >= p) {
        return Err(UoiError::invalid(format!(
            "support index {bad} out of range for {p} features"
        )));
    }
    let y = data.response();
    let y_mean = if intercept && n > 0 { y.mean() } else { 0.0 };
    let mut values = DVector::zeros(p);
    if support.is_empty() || n == 0 {
        return Ok(CoefficientVector::new(values, y_mean));
    }

    let mut xs: DMatrix<f64> = data.features().select_columns(support.indices().iter());
    let mut col_means = DVector::zeros(xs.ncols());
    if intercept {
        col_means = xs.row_mean().transpose();
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            col.add_scalar_mut(-col_means[j]);
        }
    }
    let yc = y.add_scalar(-y_mean);
    let coef = min_norm_lstsq(xs, &yc)?;
    for (k, &j) in support.indices().iter().enumerate() {
        values[j] = coef[k];
    }
    let b0 = if intercept {
        y_mean - col_means.dot(&coef)
    } else {
        0.0
    };
    Ok(CoefficientVector::new(values, b0))
}

/// Minimum-norm least-squares solution of `a x = b`. Tall, clearly full-rank
/// systems go through a Householder QR; everything else through the SVD.
pub(crate) fn min_norm_lstsq(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, k) = a.shape();
    if m >= k {
        let qr = a.clone().qr();
        let r = qr.r();
        let diag = r.diagonal().abs();
        if diag.min() > QR_RANK_TOL * diag.max() {
            let qtb = qr.q().tr_mul(b);
            if let Some(x) = r.solve_upper_triangular(&qtb) {
                return Ok(x);
            }
        }
    }
    crate::linalg::min_norm_solve(&a, b)
}

/// Below this ratio of smallest to largest `|R_ii|` the QR path is not
/// trusted to agree with the minimum-norm solution.
const QR_RANK_TOL: f64 = 1e-10;
