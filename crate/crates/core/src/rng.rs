//! Seed management. Every stochastic operation in the crate draws from a
//! ChaCha8 stream keyed by an explicit u64 seed, and nested seeds (per epoch,
//! per layer, per node) are derived with a splitmix64 mixer so that results
//! are reproducible across platforms and independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically combines a base seed with one salt.
pub fn mix(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Folds several salts into a base seed, left to right.
pub fn mix_all(seed: u64, salts: &[u64]) -> u64 {
    salts.iter().fold(seed, |acc, &s| mix(acc, s))
}
