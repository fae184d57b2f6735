//! Deterministic RNG substreams.
//!
//! All randomness in the crate flows from one root seed. Each consumer draws
//! from a named substream so that adding or reordering consumers never
//! perturbs the others, and per-instance streams (keyed by tower id) make
//! parallel and serial explanation runs identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes a root seed and a stream label into a child seed (FNV-1a).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut hash = OFFSET;
    for byte in seed.to_le_bytes().into_iter().chain(label.bytes()) {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

/// A ChaCha stream for the given root seed and label.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}
