//! Seed derivation and the crate-wide deterministic generator.
//!
//! Every stochastic operation takes an explicit `u64` seed and builds a
//! [`ChaCha8Rng`] from it. Child seeds are derived with the SplitMix64
//! finalizer so that independent streams (graph attempts, selector
//! randomness, trials) never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a sequence of tags.
pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(parent), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}
