//! Seed derivation.
//!
//! Every random draw in the pipeline comes from a [`ChaCha8Rng`] seeded with
//! `derive(master, stream, index)`. A stream is a fixed tag per consumer
//! (trace noise, fold assignment, perturbation draws, ...) and `index` is a
//! counter within that stream, so any single task can be rerun from the
//! master seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_TRACE: u64 = 1;
pub const STREAM_FOLDS: u64 = 2;
pub const STREAM_PERTURB: u64 = 3;
pub const STREAM_CORPUS: u64 = 4;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `index` within `stream` under `master`.
pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    mix(mix(mix(master) ^ stream) ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
