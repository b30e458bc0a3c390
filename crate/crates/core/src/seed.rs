//! Deterministic seed derivation. Every stochastic component in the crate
//! draws its randomness from a [`ChaCha8Rng`] seeded through this module.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Mix a master seed with a label into a child seed.
///
/// The first eight bytes (little endian) of `SHA-256(master_le || label)`.
/// Stable across platforms and releases.
pub fn derive_seed(master_seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn reproducible_and_label_sensitive() {
        assert_eq!(derive_seed(1, "si"), derive_seed(1, "si"));
        assert_ne!(derive_seed(1, "si"), derive_seed(2, "si"));
        assert_ne!(derive_seed(1, "si"), derive_seed(1, "sj"));
    }

    #[test]
    fn frozen_test_vector() {
        assert_eq!(derive_seed(1, "si"), FROZEN_MASTER1_SI);
    }

    // Recorded from the first implementation; changing it breaks every
    // stored experiment.
    const FROZEN_MASTER1_SI: u64 = 11_841_039_147_664_027_402;

    #[test]
    fn no_collisions_over_many_labels() {
        let seeds: HashSet<u64> = (0..10_000).map(|i| derive_seed(42, &format!("trial-{i}"))).collect();
        assert_eq!(seeds.len(), 10_000);
    }
}
