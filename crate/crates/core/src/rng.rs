//! Deterministic seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; mixes a stream tag into a base seed.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed2(base: u64, a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(base, a), b)
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags used by the driver so that streams never collide.
pub mod stream {
    pub const MCMC: u64 = 1;
    pub const CANDIDATES: u64 = 2;
    pub const TOLERANCES: u64 = 3;
    pub const EVALUATION: u64 = 4;
    pub const SUBSAMPLE: u64 = 5;
    pub const INITIAL_DESIGN: u64 = 6;
    pub const LHS: u64 = 7;
    pub const FINAL: u64 = 8;
    pub const KL: u64 = 9;
}
