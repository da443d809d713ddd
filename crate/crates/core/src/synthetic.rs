//! Synthetic sparse linear-model benchmarks.
//!
//! The four coefficient distributions reproduce the qualitative histogram
//! shapes used in sparse-regression simulation studies; their constants are
//! documented defaults, not fitted values.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CoefficientVector, DataSet};
use crate::error::{Result, UoiError};
use crate::resampling::{domain, SeedSpec};
use crate::support::Support;

/// Decay scale of the Laplacian-like magnitudes, as a fraction of the range.
pub const LAPLACE_SCALE_FRACTION: f64 = 0.25;
/// Growth rate of the exponential-increase magnitudes, times the range.
pub const EXP_GROWTH_TIMES_RANGE: f64 = 4.0;
/// Cluster centres and width of the clustered-positive mixture, relative to `beta_max`.
pub const CLUSTER_CENTRES: [f64; 2] = [0.33, 0.9];
pub const CLUSTER_WIDTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaDistribution {
    /// Magnitude density decaying like `exp(-|b| / scale)`, random sign.
    LaplacianLikeDecay,
    /// Uniform magnitude, random sign.
    Uniform,
    /// Magnitude density growing like `exp(c |b|)`, random sign.
    ExponentialIncrease,
    /// Two narrow positive clusters.
    ClusteredPositive,
}

impl std::str::FromStr for BetaDistribution {
    type Err = UoiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplacian-like-decay" | "laplace" => Ok(Self::LaplacianLikeDecay),
            "uniform" => Ok(Self::Uniform),
            "exponential-increase" | "exponential" => Ok(Self::ExponentialIncrease),
            "clustered-positive" | "clustered" => Ok(Self::ClusteredPositive),
            other => Err(UoiError::invalid(format!("unknown coefficient distribution `{other}`"))),
        }
    }
}

impl BetaDistribution {
    pub const ALL: [BetaDistribution; 4] = [
        Self::LaplacianLikeDecay,
        Self::Uniform,
        Self::ExponentialIncrease,
        Self::ClusteredPositive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::LaplacianLikeDecay => "laplacian-like-decay",
            Self::Uniform => "uniform",
            Self::ExponentialIncrease => "exponential-increase",
            Self::ClusteredPositive => "clustered-positive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub distribution: BetaDistribution,
    /// Noise variance as a multiple of `sum_j |beta_j|`.
    pub noise_multiplier: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub seed: SeedSpec,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n: 1200,
            p: 300,
            k: 100,
            distribution: BetaDistribution::ExponentialIncrease,
            noise_multiplier: 0.2,
            beta_min: 0.1,
            beta_max: 3.0,
            seed: SeedSpec::new(0),
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(UoiError::invalid("n must be at least 1"));
        }
        if self.k > self.p {
            return Err(UoiError::invalid(format!("k = {} exceeds p = {}", self.k, self.p)));
        }
        if !(self.beta_min >= 0.0 && self.beta_min <= self.beta_max && self.beta_max.is_finite()) {
            return Err(UoiError::invalid("need 0 <= beta_min <= beta_max < inf"));
        }
        if !(self.noise_multiplier >= 0.0) || !self.noise_multiplier.is_finite() {
            return Err(UoiError::invalid("noise multiplier must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn sparsity(&self) -> f64 {
        if self.p == 0 {
            0.0
        } else {
            1.0 - self.k as f64 / self.p as f64
        }
    }
}

/// One coefficient magnitude in `[lo, hi]`.
pub fn draw_magnitude<R: Rng + ?Sized>(dist: BetaDistribution, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let range = hi - lo;
    if range <= 0.0 {
        return lo;
    }
    let u: f64 = rng.random();
    match dist {
        BetaDistribution::Uniform => lo + range * u,
        BetaDistribution::LaplacianLikeDecay => {
            let scale = LAPLACE_SCALE_FRACTION * range;
            let mass = -(-range / scale).exp_m1();
            (lo - scale * (-u * mass).ln_1p()).min(hi)
        }
        BetaDistribution::ExponentialIncrease => {
            let c = EXP_GROWTH_TIMES_RANGE / range;
            (lo + (u * (c * range).exp_m1()).ln_1p() / c).min(hi)
        }
        BetaDistribution::ClusteredPositive => {
            let centre = if u < 0.5 { CLUSTER_CENTRES[0] } else { CLUSTER_CENTRES[1] } * hi;
            let normal = Normal::new(centre, CLUSTER_WIDTH * hi).expect("positive width");
            for _ in 0..10_000 {
                let v = normal.sample(rng);
                if v >= lo && v <= hi && v > 0.0 {
                    return v;
                }
            }
            centre.clamp(lo, hi)
        }
    }
}

/// Exactly `k` nonzero coefficients at seeded-random positions.
pub fn generate_beta(spec: &GeneratorSpec) -> Result<CoefficientVector> {
    spec.validate()?;
    let mut rng = spec.seed.substream(domain::BETA, 0).rng();
    let mut positions = rand::seq::index::sample(&mut rng, spec.p, spec.k).into_vec();
    positions.sort_unstable();
    let mut values = DVector::zeros(spec.p);
    for j in positions {
        let mut m = draw_magnitude(spec.distribution, spec.beta_min, spec.beta_max, &mut rng);
        if m == 0.0 {
            // keep the nonzero count exact even with beta_min = 0
            m = f64::MIN_POSITIVE.max(spec.beta_max * 1e-12);
        }
        let sign = match spec.distribution {
            BetaDistribution::ClusteredPositive => 1.0,
            _ if rng.random::<bool>() => 1.0,
            _ => -1.0,
        };
        values[j] = sign * m;
    }
    Ok(CoefficientVector::new(values, 0.0))
}

/// i.i.d. standard-normal design, `y = X beta + eps`, `eps ~ N(0, m * sum|beta|)`.
pub fn generate_dataset(spec: &GeneratorSpec, beta: &CoefficientVector) -> Result<DataSet> {
    spec.validate()?;
    if beta.len() != spec.p {
        return Err(UoiError::invalid(format!(
            "beta has length {}, spec says p = {}",
            beta.len(),
            spec.p
        )));
    }
    let mut design_rng = spec.seed.substream(domain::DESIGN, 0).rng();
    let x = DMatrix::from_fn(spec.n, spec.p, |_, _| {
        StandardNormal.sample(&mut design_rng)
    });
    let sigma = (spec.noise_multiplier * beta.values.lp_norm(1)).sqrt();
    let mut y = &x * &beta.values;
    if sigma > 0.0 {
        let mut noise_rng = spec.seed.substream(domain::NOISE, 0).rng();
        for v in y.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut noise_rng);
            *v += sigma * e;
        }
    }
    DataSet::new(x, y)
}

/// Generated coefficients, their support and the sampled data.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub beta: CoefficientVector,
    pub true_support: Support,
    pub data: DataSet,
}

pub fn generate(spec: &GeneratorSpec) -> Result<SyntheticInstance> {
    let beta = generate_beta(spec)?;
    let data = generate_dataset(spec, &beta)?;
    Ok(SyntheticInstance {
        true_support: beta.support(),
        beta,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(k: usize, p: usize) -> GeneratorSpec {
        GeneratorSpec {
            n: 50,
            p,
            k,
            seed: SeedSpec::new(13),
            ..Default::default()
        }
    }

    #[test]
    fn zero_k_gives_zero_vector() {
        let b = generate_beta(&spec(0, 10)).unwrap();
        assert_eq!(b.nonzero_count(), 0);
    }

    #[test]
    fn degenerate_uniform_bounds() {
        let s = GeneratorSpec {
            distribution: BetaDistribution::Uniform,
            beta_min: 1.0,
            beta_max: 1.0,
            ..spec(12, 12)
        };
        let b = generate_beta(&s).unwrap();
        assert!(b.values.iter().all(|v| *v == 1.0 || *v == -1.0));
        assert!(b.values.iter().any(|v| *v < 0.0));
    }

    #[test]
    fn exact_nonzero_count_every_distribution() {
        for dist in BetaDistribution::ALL {
            for k in [0, 1, 17, 40] {
                let s = GeneratorSpec { distribution: dist, ..spec(k, 40) };
                let b = generate_beta(&s).unwrap();
                assert_eq!(b.nonzero_count(), k, "{dist:?}");
                assert!(b.values.iter().all(|v| *v == 0.0 || (v.abs() >= 0.1 && v.abs() <= 3.0)));
                assert!((s.sparsity() - (1.0 - k as f64 / 40.0)).abs() < 1e-15);
            }
        }
        let s = GeneratorSpec { distribution: BetaDistribution::ClusteredPositive, ..spec(30, 30) };
        assert!(generate_beta(&s).unwrap().values.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn zero_noise_is_exact() {
        let s = GeneratorSpec { noise_multiplier: 0.0, ..spec(5, 10) };
        let b = generate_beta(&s).unwrap();
        let d = generate_dataset(&s, &b).unwrap();
        assert!((d.features() * &b.values - d.response()).amax() == 0.0);

        let s = GeneratorSpec { noise_multiplier: 3.0, ..spec(0, 10) };
        let d = generate_dataset(&s, &CoefficientVector::zeros(10)).unwrap();
        assert!(d.response().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn regeneration_is_bitwise_identical() {
        let s = spec(5, 10);
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.beta, b.beta);
        assert_eq!(a.data, b.data);
        let (std_data, _) = a.data.standardize();
        assert!(std_data.is_standardized());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate_beta(&spec(11, 10)).is_err());
        let s = GeneratorSpec { beta_min: 2.0, beta_max: 1.0, ..spec(1, 10) };
        assert!(generate_beta(&s).is_err());
        let s = GeneratorSpec { noise_multiplier: -1.0, ..spec(1, 10) };
        assert!(generate_beta(&s).is_err());
    }
}
