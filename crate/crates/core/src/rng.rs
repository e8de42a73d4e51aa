//! Deterministic seed derivation. Every random stream in the crate is a ChaCha8
//! generator keyed by a 64-bit seed mixed from the run seed and a stream label.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer over `seed ^ f(stream)`.
pub fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, label: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, label))
}

/// Stage labels for seeds derived from the top-level run seed.
pub mod stage {
    pub const SPLIT: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const WALK: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const EVAL: u64 = 5;
}
