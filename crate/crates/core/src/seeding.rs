//! Reproducible random streams.
//!
//! Every stochastic component draws from ChaCha8 generators whose 64-bit seeds
//! are derived from a user seed and a stream index with the SplitMix64
//! finalizer. The same `(seed, index)` pair yields the same stream on every
//! platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `index` of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}
