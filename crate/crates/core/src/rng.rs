//! Seed fan-out.
//!
//! Every random stream in the crate is a ChaCha8 generator (a counter-based
//! cipher stream). A stream is identified by `(seed, key)`; the key is mixed
//! into the seed with SplitMix64 so that sibling streams never overlap and a
//! stream never depends on which thread consumed it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a key.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    splitmix64(seed ^ splitmix64(key))
}

/// Derives a child seed from a parent seed and a textual stage label.
pub fn derive_seed_str(seed: u64, label: &str) -> u64 {
    let key = label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    derive_seed(seed, key)
}

/// Generator for the stream `(seed, key)`.
pub fn stream(seed: u64, key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, key))
}
