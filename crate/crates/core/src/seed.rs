//! Seed derivation for reproducible random streams.
//!
//! Every stream in the crate is a ChaCha8 generator seeded from a 64-bit value
//! derived here, so results depend only on the base seed and the logical
//! coordinates of a task (partition index, replication, sample size), never
//! on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the index stream owned by partition `index`: `base ^ mix64(index)`.
pub fn partition_seed(base: u64, index: usize) -> u64 {
    base ^ mix64(index as u64)
}

/// Derive a child seed from a parent and a tag.
pub fn derive(parent: u64, tag: u64) -> u64 {
    mix64(parent ^ mix64(tag.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
