//! Seeded random streams.
//!
//! All randomness is drawn from ChaCha8, a counter-based generator. A stream
//! is named by a `(seed, stream_id)` pair: the seed is expanded into the key
//! with `seed_from_u64` and the id selects one of the 2^64 independent ChaCha
//! streams under that key.
//!
//! Split rule: a component that needs its own sub-seeds (for example one per
//! bootstrap round) derives them with [`child_seed`], which hashes
//! `(seed, index)` through SplitMix64. Sibling children never share a key,
//! and the derivation does not depend on how many draws the parent made, so
//! parallel callers stay reproducible regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids used across the crate.
pub mod streams {
    pub const DATA: u64 = 1;
    pub const INIT: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const LAMBDA: u64 = 5;
    pub const BOOTSTRAP: u64 = 6;
    pub const SUBSET: u64 = 7;
}

/// Opens stream `id` under `seed`.
pub fn stream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives the seed of child `index` under `seed`.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}
