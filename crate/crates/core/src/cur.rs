//! Column subset selection: leverage scores, leverage sampling, greedy
//! selection and the bootstrap intersection / rank union variant.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UoiError};
use crate::resampling::{bootstrap_indices, domain, SeedSpec};
use crate::linalg::{pseudo_inverse, thin_svd};
use crate::support::Support;

/// Matrix whose columns are being selected. `encoded` marks `{-1, 0, 1}` data.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    entries: DMatrix<f64>,
    encoded: bool,
}

impl TargetMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(UoiError::InvalidData("matrix has non-finite entries".into()));
        }
        if entries.is_empty() {
            return Err(UoiError::InvalidData("matrix is empty".into()));
        }
        Ok(Self {
            entries,
            encoded: false,
        })
    }

    pub fn new_encoded(entries: DMatrix<f64>) -> Result<Self> {
        let mut t = Self::new(entries)?;
        if t.entries.iter().any(|v| *v != -1.0 && *v != 0.0 && *v != 1.0) {
            return Err(UoiError::InvalidData(
                "encoded matrix entries must be -1, 0 or 1".into(),
            ));
        }
        t.encoded = true;
        Ok(t)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_encoded(&self) -> bool {
        self.encoded
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    fn select_rows(&self, rows: &[usize]) -> TargetMatrix {
        TargetMatrix {
            entries: self.entries.select_rows(rows.iter()),
            encoded: self.encoded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageProfile {
    pub scores: Vec<f64>,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSubset {
    pub indices: Support,
    pub target_count: usize,
}

impl ColumnSubset {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// `l_i = ||V_k(i, :)||^2 / k` from the top-`k` right singular vectors.
pub fn leverage_scores(a: &TargetMatrix, k: usize) -> Result<LeverageProfile> {
    let (m, n) = a.entries.shape();
    if k == 0 || k > m.min(n) {
        return Err(UoiError::invalid(format!(
            "rank {k} must lie in [1, {}] for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    let svd = thin_svd(&a.entries)?;
    let mut scores = vec![0.0; n];
    for r in 0..k {
        for (i, s) in scores.iter_mut().enumerate() {
            *s += svd.v[(i, r)] * svd.v[(i, r)];
        }
    }
    let kf = k as f64;
    scores.iter_mut().for_each(|s| *s /= kf);
    Ok(LeverageProfile { scores, rank: k })
}

/// `c` distinct indices drawn one at a time with probability proportional to
/// the remaining weights. Once the remaining weight is zero the draw is
/// uniform over what is left.
pub fn sample_by_weights<R: Rng + ?Sized>(weights: &[f64], c: usize, rng: &mut R) -> Result<Support> {
    let n = weights.len();
    if c == 0 || c > n {
        return Err(UoiError::invalid(format!("cannot draw {c} of {n} columns")));
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut chosen = Vec::with_capacity(c);
    for _ in 0..c {
        let total: f64 = remaining.iter().map(|&i| weights[i].max(0.0)).sum();
        let pos = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (pos, &i) in remaining.iter().enumerate() {
                let w = weights[i].max(0.0);
                acc += w;
                if w > 0.0 && target < acc {
                    pick = Some(pos);
                    break;
                }
            }
            // rounding can leave target at the very end of the range
            pick.unwrap_or_else(|| {
                remaining
                    .iter()
                    .rposition(|&i| weights[i] > 0.0)
                    .expect("positive total weight")
            })
        } else {
            rng.random_range(0..remaining.len())
        };
        chosen.push(remaining.remove(pos));
    }
    Ok(chosen.into_iter().collect())
}

/// Leverage-score column sampling without replacement.
pub fn sample_columns_basic(a: &TargetMatrix, k: usize, c: usize, seed: SeedSpec) -> Result<ColumnSubset> {
    if c == 0 || c > a.ncols() {
        return Err(UoiError::invalid(format!(
            "column count {c} must lie in [1, {}]",
            a.ncols()
        )));
    }
    let lev = leverage_scores(a, k)?;
    let indices = sample_by_weights(&lev.scores, c, &mut seed.rng())?;
    Ok(ColumnSubset {
        indices,
        target_count: c,
    })
}

/// Greedy selection: each step adds the column whose inclusion leaves the
/// smallest Frobenius residual `||A - C C^+ A||_F`. Near-ties go to the lowest index.
pub fn greedy_cur(a: &TargetMatrix, c: usize) -> Result<ColumnSubset> {
    let n = a.ncols();
    if c == 0 || c > n {
        return Err(UoiError::invalid(format!("column count {c} must lie in [1, {n}]")));
    }
    let mut resid = a.entries.clone();
    let total = resid.norm_squared();
    let tie_tol = 1e-10 * total.max(f64::MIN_POSITIVE);
    let mut selected = vec![false; n];
    let mut chosen = Vec::with_capacity(c);
    for _ in 0..c {
        let gram = resid.transpose() * &resid;
        let current = resid.norm_squared();
        let errors: Vec<Option<f64>> = (0..n)
            .map(|j| {
                if selected[j] {
                    return None;
                }
                let d = gram[(j, j)];
                let reduction = if d > 1e-14 * total {
                    gram.column(j).norm_squared() / d
                } else {
                    0.0
                };
                Some((current - reduction).max(0.0))
            })
            .collect();
        let best = errors
            .iter()
            .flatten()
            .fold(f64::INFINITY, |m, &e| m.min(e));
        let pick = errors
            .iter()
            .position(|e| matches!(e, Some(v) if *v <= best + tie_tol))
            .expect("at least one unselected column");
        selected[pick] = true;
        chosen.push(pick);
        let col = resid.column(pick).clone_owned();
        let norm = col.norm();
        if norm > 1e-7 * total.sqrt() {
            let q = col / norm;
            let proj = q.transpose() * &resid;
            resid -= &q * proj;
        }
    }
    Ok(ColumnSubset {
        indices: chosen.into_iter().collect(),
        target_count: c,
    })
}

/// Seed of bootstrap `b` for rank `k` in [`uoi_cur_select`]; the row resample
/// uses this stream and the column draw uses its `CUR` child stream.
pub fn cur_bootstrap_seed(seed: SeedSpec, k: usize, b: usize) -> SeedSpec {
    seed.substream(domain::CUR, k as u64)
        .substream(domain::SELECTION, b as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurSelection {
    pub subset: ColumnSubset,
    /// Intersected subset for each requested rank, in input order.
    pub per_rank: Vec<Support>,
    /// The union came out empty.
    pub degenerate: bool,
}

/// For each rank: intersect the leverage-sampled column sets of `b1` row
/// bootstraps. The result is the union of the per-rank intersections.
pub fn uoi_cur_select(
    a: &TargetMatrix,
    ranks: &[usize],
    c_per_rank: usize,
    b1: usize,
    seed: SeedSpec,
) -> Result<CurSelection> {
    let (m, n) = a.entries.shape();
    if ranks.is_empty() {
        return Err(UoiError::invalid("at least one rank is required"));
    }
    if b1 == 0 {
        return Err(UoiError::invalid("b1 must be at least 1"));
    }
    if c_per_rank == 0 || c_per_rank > n {
        return Err(UoiError::invalid(format!(
            "columns per rank {c_per_rank} must lie in [1, {n}]"
        )));
    }
    if let Some(&bad) = ranks.iter().find(|&&k| k == 0 || k > m.min(n)) {
        return Err(UoiError::invalid(format!(
            "rank {bad} must lie in [1, {}]",
            m.min(n)
        )));
    }
    let tasks: Vec<(usize, usize)> = ranks
        .iter()
        .flat_map(|&k| (0..b1).map(move |b| (k, b)))
        .collect();
    let draws: Vec<Support> = tasks
        .par_iter()
        .map(|&(k, b)| -> Result<Support> {
            let s = cur_bootstrap_seed(seed, k, b);
            let rows = bootstrap_indices(m, s)?;
            let sample = a.select_rows(rows.indices());
            Ok(sample_columns_basic(&sample, k, c_per_rank, s.substream(domain::CUR, 0))?.indices)
        })
        .collect::<Result<_>>()?;
    let per_rank: Vec<Support> = draws
        .chunks(b1)
        .map(crate::support::intersect_supports)
        .collect::<Result<_>>()?;
    let union = per_rank.iter().fold(Support::empty(), |acc, s| acc.union(s));
    let degenerate = union.is_empty();
    Ok(CurSelection {
        subset: ColumnSubset {
            indices: union,
            target_count: c_per_rank,
        },
        per_rank,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionError {
    /// `||A - C C^+ A||_F`.
    pub frobenius: f64,
    /// Mismatch count of the `{-1, 0, 1}`-rounded reconstruction over `nnz(A)`;
    /// only for encoded matrices.
    pub nnz_ratio: Option<f64>,
}

/// Nearest code in `{-1, 0, 1}`; exact halves round toward zero.
fn round_to_code(v: f64) -> f64 {
    if v > 0.5 {
        1.0
    } else if v < -0.5 {
        -1.0
    } else {
        0.0
    }
}

pub fn reconstruction_error(a: &TargetMatrix, subset: &Support) -> Result<ReconstructionError> {
    if subset.is_empty() {
        return Err(UoiError::invalid("reconstruction needs a non-empty column subset"));
    }
    let n = a.ncols();
    if let Some(&bad) = subset.indices().iter().find(|&&j| j >= n) {
        return Err(UoiError::invalid(format!("column {bad} out of range for {n} columns")));
    }
    let c = a.entries.select_columns(subset.indices().iter());
    let approx = &c * (pseudo_inverse(&c)? * &a.entries);
    let frobenius = (&a.entries - &approx).norm();
    let nnz_ratio = a.encoded.then(|| {
        let mismatches = approx
            .iter()
            .zip(a.entries.iter())
            .filter(|(h, v)| round_to_code(**h) != **v)
            .count();
        let nnz = a.entries.iter().filter(|v| **v != 0.0).count();
        let denom = if nnz == 0 { a.entries.len() } else { nnz };
        mismatches as f64 / denom as f64
    });
    Ok(ReconstructionError {
        frobenius,
        nnz_ratio,
    })
}

/// Errors of the three selectors at a shared column budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurComparison {
    pub budget: usize,
    pub uoi: CurSelection,
    pub uoi_error: Option<ReconstructionError>,
    pub basic: ColumnSubset,
    pub basic_error: ReconstructionError,
    pub greedy: ColumnSubset,
    pub greedy_error: ReconstructionError,
}

/// Runs UoI column selection, then gives leverage sampling (at the largest
/// rank) and greedy selection a budget equal to the UoI subset size.
pub fn equal_budget_comparison(
    a: &TargetMatrix,
    ranks: &[usize],
    c_per_rank: usize,
    b1: usize,
    seed: SeedSpec,
) -> Result<CurComparison> {
    let uoi = uoi_cur_select(a, ranks, c_per_rank, b1, seed)?;
    let budget = uoi.subset.len().max(1);
    let k = *ranks.iter().max().expect("non-empty ranks");
    let basic = sample_columns_basic(a, k, budget, seed.substream(domain::CUR, u64::MAX))?;
    let greedy = greedy_cur(a, budget)?;
    let uoi_error = if uoi.degenerate {
        None
    } else {
        Some(reconstruction_error(a, &uoi.subset.indices)?)
    };
    Ok(CurComparison {
        budget,
        uoi_error,
        basic_error: reconstruction_error(a, &basic.indices)?,
        greedy_error: reconstruction_error(a, &greedy.indices)?,
        uoi,
        basic,
        greedy,
    })
}
