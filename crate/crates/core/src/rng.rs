//! All randomness is derived from an explicit 64-bit seed. Streams for
//! independent work items (snapshots, restarts, instances) are keyed by
//! `(seed, index)` so serial and parallel runs draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for work item `index` under `seed`, keyed by a ChaCha stream id.
pub fn derived_rng(seed: u64, index: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    rng.set_stream(index);
    rng
}

/// A child seed for a named sub-task, e.g. shadow sampling inside `learn`.
pub fn child_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}
