//! Deterministic RNG plumbing.
//!
//! Every random quantity in the crate is drawn from ChaCha8, a counter-based
//! generator whose output is identical across platforms for a fixed seed.
//! Independent sub-streams (panel rows, sweep cells) are obtained either from
//! ChaCha's native stream mechanism or by hashing `(seed, index)` through
//! SplitMix64, so adding workers or reordering jobs never changes results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ChaCha8 generator seeded for a given logical stream of a master seed.
///
/// Streams with different indices are statistically independent; the same
/// `(seed, stream)` pair always yields the same draws.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 hash, used to derive child seeds from `(master, index)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(index.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
