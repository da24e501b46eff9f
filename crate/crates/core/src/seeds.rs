//! Counter-based seed derivation: every random stream in a run is a pure
//! function of the master seed and a path of small integers, so any sweep
//! cell or ensemble member can be recomputed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Experiment identifiers mixed into derived seeds.
pub mod experiment {
    pub const TONGUE: u64 = 1;
    pub const FAST_LIMIT: u64 = 2;
    pub const SCALING: u64 = 3;
    pub const DECAY: u64 = 4;
}

/// Stream identifiers below an ensemble member.
pub mod stream {
    pub const INITIAL_CONDITIONS: u64 = 1;
    pub const MISMATCH: u64 = 2;
    pub const GRAPH: u64 = 3;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `path` into `master`, one splitmix round per component.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
