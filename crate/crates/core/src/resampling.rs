//! Seeded resampling plans.
//!
//! Every random draw in the crate comes from a ChaCha20 stream keyed by a
//! [`SeedSpec`]: the master seed is expanded to the 256-bit key with
//! `SeedableRng::seed_from_u64` and the stream id selects the ChaCha stream.
//! Tasks derive their stream ids from their own coordinates (bootstrap number,
//! repetition, ...) with [`SeedSpec::substream`], never from a shared counter,
//! so results do not depend on scheduling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UoiError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

/// Stream domains, so that e.g. selection bootstrap 3 and estimation
/// bootstrap 3 never share randomness.
pub mod domain {
    pub const SELECTION: u64 = 1;
    pub const STABILITY: u64 = 2;
    pub const ESTIMATION: u64 = 3;
    pub const REPETITION: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const CUR: u64 = 6;
    pub const BETA: u64 = 7;
    pub const DESIGN: u64 = 8;
    pub const NOISE: u64 = 9;
    pub const SWEEP: u64 = 10;
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            stream_id: 0,
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream identified by `(domain, index)` under this stream.
    pub fn substream(&self, domain: u64, index: u64) -> SeedSpec {
        let mut h = splitmix64(self.stream_id ^ 0x5851_f42d_4c95_7f2d);
        h = splitmix64(h ^ domain.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        h = splitmix64(h ^ index);
        SeedSpec {
            master_seed: self.master_seed,
            stream_id: h,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleKind {
    BootstrapWithReplacement,
    HalfSubsampleWithoutReplacement,
    FractionalSplit,
}

/// Index sets into `[0, n)`. Bootstraps and subsamples use one block; the
/// 80/10/10 split uses three (train, selection, test).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub kind: ResampleKind,
    pub blocks: Vec<Vec<usize>>,
}

impl ResamplePlan {
    pub fn indices(&self) -> &[usize] {
        &self.blocks[0]
    }

    /// Rows of `[0, n)` that never appear in the first block.
    pub fn out_of_bag(&self, n: usize) -> Vec<usize> {
        let mut seen = vec![false; n];
        for &i in self.indices() {
            seen[i] = true;
        }
        (0..n).filter(|&i| !seen[i]).collect()
    }
}

pub fn bootstrap_indices(n: usize, seed: SeedSpec) -> Result<ResamplePlan> {
    if n == 0 {
        return Err(UoiError::invalid("bootstrap needs at least one sample"));
    }
    let mut rng = seed.rng();
    let idx = (0..n).map(|_| rng.random_range(0..n)).collect();
    Ok(ResamplePlan {
        kind: ResampleKind::BootstrapWithReplacement,
        blocks: vec![idx],
    })
}

/// `floor(n/2)` distinct indices, sorted.
pub fn half_subsample(n: usize, seed: SeedSpec) -> Result<ResamplePlan> {
    if n < 2 {
        return Err(UoiError::invalid("half-subsample needs at least two samples"));
    }
    let mut rng = seed.rng();
    let mut idx = rand::seq::index::sample(&mut rng, n, n / 2).into_vec();
    idx.sort_unstable();
    Ok(ResamplePlan {
        kind: ResampleKind::HalfSubsampleWithoutReplacement,
        blocks: vec![idx],
    })
}

/// Seeded permutation cut into blocks of `floor(0.8n)`, `floor(0.1n)` and the rest.
pub fn split_80_10_10(n: usize, seed: SeedSpec) -> Result<ResamplePlan> {
    if n < 10 {
        return Err(UoiError::invalid(format!(
            "80-10-10 split needs at least 10 samples, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed.rng());
    let n_train = n * 8 / 10;
    let n_sel = n / 10;
    let test = perm.split_off(n_train + n_sel);
    let sel = perm.split_off(n_train);
    Ok(ResamplePlan {
        kind: ResampleKind::FractionalSplit,
        blocks: vec![perm, sel, test],
    })
}
