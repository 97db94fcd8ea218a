//! Deterministic random streams.
//!
//! ChaCha8 is portable across platforms and word sizes, so a seed fixes the
//! stream everywhere.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for sub-task `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn normal(rng: &mut SeededRng) -> f32 {
    let v: f64 = StandardNormal.sample(rng);
    v as f32
}

/// Uniform in `[-limit, limit)`.
pub fn uniform_symmetric(rng: &mut SeededRng, limit: f32) -> f32 {
    rng.random_range(-limit..limit)
}

/// Fan-in scaled uniform init: `U(-1/√fan_in, 1/√fan_in)`.
pub fn fan_in_uniform(rng: &mut SeededRng, len: usize, fan_in: usize) -> Vec<f32> {
    let limit = 1.0 / (fan_in.max(1) as f32).sqrt();
    (0..len).map(|_| uniform_symmetric(rng, limit)).collect()
}

pub fn shuffled_indices(rng: &mut SeededRng, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
