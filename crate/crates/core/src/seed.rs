//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a
//! 64-bit value. Child seeds are derived from a parent seed and a list of
//! integer tags by folding each tag through a SplitMix64 finaliser:
//!
//! ```text
//! s0 = mix(parent)
//! s_{k+1} = mix(s_k ^ mix(tag_k + GOLDEN * (k + 1)))
//! ```
//!
//! so `derive_seed(seed, &[replicate, STREAM_FILTER, m, b])` identifies one
//! particle's stream regardless of how work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tags for the major consumers of randomness.
pub mod stream {
    pub const SIMULATION: u64 = 1;
    pub const FILTER: u64 = 2;
    pub const RESAMPLE: u64 = 3;
    pub const LINES: u64 = 4;
    pub const MCMC: u64 = 5;
    pub const FORWARD: u64 = 6;
    pub const TRIAL: u64 = 7;
    pub const NOISE: u64 = 8;
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    let mut s = mix(parent);
    for (k, &t) in tags.iter().enumerate() {
        s = mix(s ^ mix(t.wrapping_add(GOLDEN.wrapping_mul(k as u64 + 1))));
    }
    s
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn derive_rng(parent: u64, tags: &[u64]) -> SimRng {
    rng_from_seed(derive_seed(parent, tags))
}

/// Draws a base seed from a caller-provided generator.
pub fn base_seed<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}
