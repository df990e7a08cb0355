//! Deterministic seed derivation.
//!
//! Every random stream in an experiment is keyed by `(master, stream, index)`
//! and seeded through two rounds of splitmix64, so trials can be generated in
//! any order or in parallel and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used by the experiment harness.
pub mod stream {
    pub const SU_CHANNEL: u64 = 1;
    pub const PU_GAINS: u64 = 2;
    pub const SYMBOLS: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const ALLOCATION: u64 = 5;
}

/// One splitmix64 step.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for item `index` of stream `stream` under `master`.
pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)) ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_rng(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    rng(derive(master, stream, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference generator seeded with 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn streams_do_not_collide() {
        let mut seen = HashSet::new();
        for s in 0..8 {
            for i in 0..1000 {
                assert!(seen.insert(derive(42, s, i)));
            }
        }
    }

    #[test]
    fn derivation_is_stable() {
        assert_eq!(derive(7, 1, 3), derive(7, 1, 3));
        assert_ne!(derive(7, 1, 3), derive(8, 1, 3));
    }
}
