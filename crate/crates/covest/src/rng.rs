//! Deterministic seed derivation and seeded draws.
//!
//! Every stochastic component derives its RNG from a root seed plus a
//! fixed tuple of counters (replicate, epoch, grid index, ...) via a
//! SplitMix64-style mix. Results are therefore independent of thread
//! scheduling: parallel workers never share RNG state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Collapse a root seed and counters into one 64-bit stream seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        let mut z = h ^ p.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Seeded RNG for one derivation path.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// n iid standard normal draws from a derived seed.
pub fn normal_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}
