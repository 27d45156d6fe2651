//! Seed derivation and labeled random streams.
//!
//! Every run owns one 64-bit seed. Independent sub-streams (graph, initial
//! opinions, stubbornness, category permutation, events, injection) are
//! separate ChaCha streams keyed by that seed, so enabling or disabling one
//! consumer never shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Labeled sub-streams of a single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Graph = 1,
    Opinions = 2,
    Stubbornness = 3,
    Categories = 4,
    Events = 5,
    Injection = 6,
}

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of repeat `repeat` of grid combination `combo`.
///
/// For a fixed master seed the map `(combo, repeat) -> seed` is injective as
/// long as `repeat < 2^32` and `combo < 2^32`.
pub fn run_seed(master: u64, combo: usize, repeat: usize) -> u64 {
    debug_assert!(combo < (1 << 32) && repeat < (1 << 32));
    let key = ((combo as u64) << 32) | repeat as u64;
    mix64(mix64(master ^ 0x5eed_0f_5eed).wrapping_add(key))
}

/// Child seed `index` of `seed`, used for re-sampling attempts and similar.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed).wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
