//! Deterministic sub-seeding: every random stream is a function of one
//! user seed, a stage tag and an item index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Smoothing = 1,
    SmoothGrad = 2,
    RandomScores = 3,
    SyntheticData = 4,
    Training = 5,
}

/// Independent stream for `(seed, stage, index)`.
pub fn stream(seed: u64, stage: Stage, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stage as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// `count` i.i.d. `N(0, sigma^2)` vectors of length `dim`.
pub fn gaussian_noises(rng: &mut ChaCha8Rng, count: usize, dim: usize, sigma: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    sigma * z
                })
                .collect()
        })
        .collect()
}

/// Order-independent key for an input vector (FNV-1a over the bit patterns),
/// so per-input streams do not depend on dataset position.
pub fn content_key(values: &[f64]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    values
        .iter()
        .flat_map(|v| v.to_bits().to_le_bytes())
        .fold(OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// A fresh `u64` seed for `(seed, stage, index)`.
pub fn derive(seed: u64, stage: Stage, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, stage, index).next_u64()
}
