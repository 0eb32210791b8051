//! Deterministic RNG stream derivation.
//!
//! Every noise source in a run (world wind, sensing noise, fault draws,
//! spray droplets, ...) pulls from its own ChaCha stream derived from the
//! master seed and a stream key. Toggling one fault therefore never shifts
//! the draw sequence of an unrelated stream, which keeps paired Monte
//! Carlo comparisons valid.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a 64-bit hash. Stable across platforms and releases, unlike
/// `std::collections::hash_map::DefaultHasher`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// splitmix64 finalizer, used to decorrelate the combined seed bits.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derive the independent RNG stream `key` from the master seed.
pub fn stream(master_seed: u64, key: &str) -> ChaCha8Rng {
    let mixed = splitmix64(master_seed ^ fnv1a64(key.as_bytes()));
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Stream keys used by the harness. Scenario docs reference these names.
pub mod keys {
    pub const WIND: &str = "wind";
    pub const GPS: &str = "gps";
    pub const DETECTOR: &str = "detector";
    pub const THERMAL: &str = "thermal";
    pub const RANGE: &str = "range";
    pub const FAULTS: &str = "faults";
    pub const SPRAY: &str = "spray";
    pub const SEARCH: &str = "search";
    pub const CORNERS: &str = "corners";
}
