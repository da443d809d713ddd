//! Dense singular value decomposition (computed with faer) and the
//! pseudo-inverse and minimum-norm solves built on it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, UoiError};

/// Thin SVD `a = u diag(s) v^T` with `s` non-increasing.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    /// Singular values above `max(m, n) * eps * s_max` count toward the rank.
    fn cutoff(&self) -> f64 {
        let dim = self.u.nrows().max(self.v.nrows()) as f64;
        let smax = self.s.iter().cloned().fold(0.0, f64::max);
        f64::EPSILON * dim * smax
    }

    pub fn rank(&self) -> usize {
        let tol = self.cutoff();
        self.s.iter().filter(|&&v| v > tol).count()
    }
}

pub(crate) fn thin_svd(a: &DMatrix<f64>) -> Result<Svd> {
    let (m, n) = a.shape();
    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = fa
        .thin_svd()
        .map_err(|e| UoiError::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    let r = m.min(n);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal));
    Ok(Svd {
        u: DMatrix::from_fn(m, r, |i, k| u[(i, order[k])]),
        s: DVector::from_fn(r, |k, _| s[order[k]]),
        v: DMatrix::from_fn(n, r, |i, k| v[(i, order[k])]),
    })
}

/// Moore-Penrose pseudo-inverse with the usual `max(m, n) * eps * s_max` cutoff.
pub(crate) fn pseudo_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(DMatrix::zeros(n, m));
    }
    let svd = thin_svd(a)?;
    let r = svd.rank();
    let mut vs = svd.v.columns(0, r).into_owned();
    for (k, mut col) in vs.column_iter_mut().enumerate() {
        col /= svd.s[k];
    }
    Ok(vs * svd.u.columns(0, r).transpose())
}

/// Minimum-norm solution of `a x = b` in the least-squares sense.
pub(crate) fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = thin_svd(a)?;
    let r = svd.rank();
    let mut coef = svd.u.columns(0, r).tr_mul(b);
    for k in 0..r {
        coef[k] /= svd.s[k];
    }
    Ok(svd.v.columns(0, r) * coef)
}
