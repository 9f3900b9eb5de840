//! Counter-based random streams.
//!
//! Every consumer of randomness asks for a stream keyed by the master seed, a
//! purpose tag and an index (usually the scenario number). Streams never share
//! state, so results do not depend on how scenarios are distributed over
//! worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Distinct purposes get unrelated keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Innovations,
    Mortality,
    Permutation,
    Test,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Innovations => 0x6a09_e667_f3bc_c908,
            Purpose::Mortality => 0xbb67_ae85_84ca_a73b,
            Purpose::Permutation => 0x3c6e_f372_fe94_f82b,
            Purpose::Test => 0xa54f_f53a_5f1d_36f1,
        }
    }
}

/// Independent stream number `index` for `purpose` under `master_seed`.
pub fn stream(master_seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(master_seed ^ purpose.tag()));
    rng.set_stream(index);
    rng
}

/// 64-bit key for `purpose` under `master_seed`, for keyed hashing.
pub fn key(master_seed: u64, purpose: Purpose) -> u64 {
    mix64(mix64(master_seed) ^ purpose.tag())
}

/// SplitMix64 finaliser; a bijective avalanche mix on 64-bit words.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
