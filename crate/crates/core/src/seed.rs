//! Deterministic seed derivation.
//!
//! Every stochastic choice in a run draws from a ChaCha stream whose seed is
//! derived from the master seed and a stable stream name, so adding a new
//! consumer never shifts the streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// FNV-1a, fixed so stream ids never depend on the std hasher.
fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derives a child seed for the named stream.
pub fn derive_seed(base: u64, stream: &str) -> u64 {
    splitmix64(base ^ splitmix64(fnv1a(stream)))
}

/// Derives a child seed for an indexed stream (round `i`, sweep row `i`, ...).
pub fn derive_indexed(base: u64, stream: &str, index: u64) -> u64 {
    splitmix64(derive_seed(base, stream) ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
