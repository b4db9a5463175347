//! Seeded random streams. Every stochastic step draws from its own ChaCha
//! stream so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod streams {
    pub const BALANCE: u64 = 1;
    pub const FOLDS: u64 = 2;
    pub const RELIEFF: u64 = 3;
    pub const ABC: u64 = 4;
    pub const DIFF_EVOLUTION: u64 = 5;
    pub const SVM: u64 = 6;
    pub const FOREST: u64 = 7;
    pub const SYNTHETIC: u64 = 8;
    pub const WRAPPER_FOLDS: u64 = 9;
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed; used to give each tree or fold its own seed.
pub fn derive(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
