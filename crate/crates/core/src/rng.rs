//! Seed derivation and per-path random streams.
//!
//! Every random draw is addressed by `(seed, path)`: path `i` reads ChaCha8
//! stream `i` keyed by the run seed, so its increments do not depend on
//! which worker runs it or in what order. Sub-seeds for independent
//! ensembles of one run (limit ensemble, each ε rung, ...) come from
//! [`derive_seed`] with a fixed tag per consumer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// Stream for path `path` of the ensemble keyed by `seed`.
pub fn path_rng(seed: u64, path: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sub-seed `splitmix64(seed ⊕ splitmix64(tag))`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Tags used by the library when deriving sub-seeds.
pub mod tags {
    pub const LIMIT_ENSEMBLE: u64 = 0x4c49_4d49_54;
    pub const RUNG_BASE: u64 = 0x5255_4e47_0000;
    pub const SEMIGROUP_MC: u64 = 0x5345_4d49;
}
