//! Seeded randomness.
//!
//! Every random draw in the crate comes from a [`Xoshiro256PlusPlus`]
//! generator whose 64-bit seed is expanded with SplitMix64. Seeds for
//! sub-tasks (sampling, fold assignment, each model of each fold, each tree
//! of a forest) are derived from one master seed with [`derive_seed`], so a
//! single integer reproduces a whole training run regardless of how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

pub fn rng_from_seed(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// One SplitMix64 output step.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `(seed, purpose, index)`.
///
/// The purpose tag is folded in with 64-bit FNV-1a, then the parent seed,
/// tag hash and index are chained through SplitMix64.
pub fn derive_seed(seed: u64, purpose: &str, index: u64) -> u64 {
    let mut tag: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.bytes() {
        tag ^= u64::from(b);
        tag = tag.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let a = splitmix64(seed);
    let b = splitmix64(a ^ tag);
    splitmix64(b ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
