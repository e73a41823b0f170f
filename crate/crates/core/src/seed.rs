//! Deterministic seed derivation for loop runs.
//!
//! A per-iteration, per-role seed is
//! `splitmix64(master ^ (iteration * GOLDEN) ^ role)`, so every random
//! stream in a run is a pure function of the master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Which random stream a derived seed feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedRole {
    Fit,
    Sample,
    Select,
}

impl SeedRole {
    // Hex digits of pi; any distinct odd-looking constants would do.
    pub const fn constant(self) -> u64 {
        match self {
            SeedRole::Fit => 0x243F_6A88_85A3_08D3,
            SeedRole::Sample => 0x1319_8A2E_0370_7344,
            SeedRole::Select => 0xA409_3822_299F_31D0,
        }
    }
}

/// One step of the SplitMix64 output function applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, iteration: u64, role: SeedRole) -> u64 {
    splitmix64(master ^ iteration.wrapping_mul(GOLDEN) ^ role.constant())
}

/// The RNG used throughout the crate. ChaCha8 output is specified and
/// platform independent.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
