//! Deterministic random streams. Every consumer derives its own ChaCha8
//! stream from a `(seed, stream-id...)` tuple, so results never depend on
//! thread scheduling or on how many draws another component made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hash::derive_seed;

pub type DetRng = ChaCha8Rng;

pub fn rng_from(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, parts: &[u64]) -> DetRng {
    let mut all = Vec::with_capacity(parts.len() + 1);
    all.push(seed);
    all.extend_from_slice(parts);
    ChaCha8Rng::seed_from_u64(derive_seed(&all))
}
