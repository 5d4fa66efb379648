//! Deterministic sub-seed derivation.
//!
//! Every stochastic component (dropout masks, shuffles, grid cells, synthetic
//! vehicles, permutation repetitions) draws from a ChaCha stream seeded by
//! mixing a master seed with a purpose tag, so runs are reproducible and
//! independent units can execute in any order or in parallel.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates consecutive tags.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a tag.
pub fn mix(master: u64, tag: u64) -> u64 {
    splitmix64(master ^ splitmix64(tag))
}

/// Derive a child seed from a master seed and two tags (e.g. input index and
/// repetition index).
pub fn mix2(master: u64, tag_a: u64, tag_b: u64) -> u64 {
    mix(mix(master, tag_a), tag_b)
}

/// Seeded RNG used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
