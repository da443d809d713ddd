//! Sample containers and fitted coefficient vectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, UoiError};
use crate::support::Support;

const STANDARDIZED_TOL: f64 = 1e-8;

/// Design matrix plus response. Rows are samples, columns are predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    features: DMatrix<f64>,
    response: DVector<f64>,
    column_standardized: bool,
}

impl DataSet {
    pub fn new(features: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        if features.nrows() != response.len() {
            return Err(UoiError::InvalidData(format!(
                "feature matrix has {} rows but response has {} entries",
                features.nrows(),
                response.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % features.nrows(), pos / features.nrows());
            return Err(UoiError::InvalidData(format!(
                "non-finite feature at row {r}, column {c}"
            )));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(UoiError::InvalidData(format!(
                "non-finite response at row {i}"
            )));
        }
        Ok(Self {
            features,
            response,
            column_standardized: false,
        })
    }

    /// Builds a data set and marks it standardized after checking that every
    /// column has unit sum of squares.
    pub fn new_standardized(features: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        let mut data = Self::new(features, response)?;
        for (j, col) in data.features.column_iter().enumerate() {
            let ss = col.norm_squared();
            if (ss - 1.0).abs() > STANDARDIZED_TOL {
                return Err(UoiError::InvalidData(format!(
                    "column {j} has sum of squares {ss}, expected 1"
                )));
            }
        }
        data.column_standardized = true;
        Ok(data)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn is_standardized(&self) -> bool {
        self.column_standardized
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>) {
        (self.features, self.response)
    }

    /// Row subset (with repetition allowed, as produced by a bootstrap).
    pub fn select_rows(&self, rows: &[usize]) -> DataSet {
        DataSet {
            features: self.features.select_rows(rows.iter()),
            response: self.response.select_rows(rows.iter()),
            column_standardized: false,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> DataSet {
        DataSet {
            features: self.features.select_columns(cols.iter()),
            response: self.response.clone(),
            column_standardized: self.column_standardized,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.response.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Centers every column and scales it to unit sum of squares. Constant
    /// columns are left at zero with unit scale.
    pub fn standardize(&self) -> (DataSet, Standardization) {
        let n = self.n_samples();
        let p = self.n_features();
        let mut features = self.features.clone();
        let mut means = vec![0.0; p];
        let mut scales = vec![1.0; p];
        for (j, mut col) in features.column_iter_mut().enumerate() {
            let mean = if n > 0 { col.sum() / n as f64 } else { 0.0 };
            col.add_scalar_mut(-mean);
            let norm = col.norm();
            means[j] = mean;
            if norm > f64::EPSILON * (1.0 + mean.abs()) * (n as f64).sqrt() {
                col.unscale_mut(norm);
                scales[j] = norm;
            } else {
                col.fill(0.0);
            }
        }
        // constant columns end up all-zero, so the unit-norm flag cannot be set
        let standardized_flag = features
            .column_iter()
            .all(|c| (c.norm_squared() - 1.0).abs() <= STANDARDIZED_TOL);
        let data = DataSet {
            features,
            response: self.response.clone(),
            column_standardized: standardized_flag,
        };
        (data, Standardization { means, scales })
    }
}

/// Per-column affine map produced by [`DataSet::standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    /// Maps coefficients fit on standardized columns back to the original
    /// column scale.
    pub fn to_original(&self, fitted: &CoefficientVector) -> CoefficientVector {
        let values = DVector::from_iterator(
            fitted.values.len(),
            fitted
                .values
                .iter()
                .zip(&self.scales)
                .map(|(b, s)| if *b == 0.0 { 0.0 } else { b / s }),
        );
        let shift: f64 = values.iter().zip(&self.means).map(|(b, m)| b * m).sum();
        CoefficientVector {
            values,
            intercept: fitted.intercept - shift,
        }
    }

    pub fn apply(&self, features: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = features.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.means[j]);
            col.unscale_mut(self.scales[j]);
        }
        out
    }
}

/// Fitted linear coefficients and an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    #[serde(with = "dvector_as_vec")]
    pub values: DVector<f64>,
    pub intercept: f64,
}

impl CoefficientVector {
    pub fn zeros(p: usize) -> Self {
        Self {
            values: DVector::zeros(p),
            intercept: 0.0,
        }
    }

    pub fn new(values: DVector<f64>, intercept: f64) -> Self {
        Self { values, intercept }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear predictor `X b + intercept`.
    pub fn predict(&self, features: &DMatrix<f64>) -> DVector<f64> {
        let mut eta = features * &self.values;
        eta.add_scalar_mut(self.intercept);
        eta
    }

    pub fn support(&self) -> Support {
        Support::from_nonzeros(self.values.as_slice())
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.values.iter().all(|v| v.is_finite())
    }
}

pub(crate) mod dvector_as_vec {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        Ok(DVector::from_vec(raw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_lengths() {
        let x = DMatrix::zeros(3, 2);
        let y = DVector::zeros(2);
        assert!(matches!(DataSet::new(x, y), Err(UoiError::InvalidData(_))));
    }

    #[test]
    fn rejects_non_finite() {
        let mut x = DMatrix::zeros(3, 2);
        x[(1, 1)] = f64::NAN;
        assert!(DataSet::new(x, DVector::zeros(3)).is_err());
        let mut y = DVector::zeros(3);
        y[2] = f64::INFINITY;
        assert!(DataSet::new(DMatrix::zeros(3, 2), y).is_err());
    }

    #[test]
    fn standardized_constructor_checks_norms() {
        let x = DMatrix::from_row_slice(2, 1, &[0.6, 0.8]);
        assert!(DataSet::new_standardized(x, DVector::zeros(2)).is_ok());
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(DataSet::new_standardized(x, DVector::zeros(2)).is_err());
    }

    #[test]
    fn standardize_round_trips_predictions() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 30.0, 3.0, 20.0, 5.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let data = DataSet::new(x.clone(), y).unwrap();
        let (std_data, map) = data.standardize();
        assert!(std_data.is_standardized());
        for col in std_data.features().column_iter() {
            assert!((col.norm_squared() - 1.0).abs() < 1e-12);
            assert!(col.sum().abs() < 1e-12);
        }
        let fitted = CoefficientVector::new(DVector::from_vec(vec![0.7, -1.3]), 0.25);
        let original = map.to_original(&fitted);
        let a = fitted.predict(std_data.features());
        let b = original.predict(&x);
        assert!((a - b).amax() < 1e-12);
    }
}
