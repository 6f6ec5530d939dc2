//! Counter-based random streams.
//!
//! A stream is addressed by `(seed, purpose, block)`; samples are grouped into
//! fixed-size blocks so any block can be regenerated on its own and two
//! consumers of the same `(seed, purpose)` see the same draws regardless of
//! how they iterate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples per block.
pub const BLOCK: usize = 1024;

/// What a stream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Features = 1,
    Noise = 2,
    Directions = 3,
    Instance = 4,
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable order-sensitive hash of a sequence of words.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// Generator for one block of one purpose.
pub fn block_rng(seed: u64, purpose: Purpose, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[purpose as u64, block]));
    rng.set_stream(purpose as u64);
    rng
}

/// Generator for a one-off purpose (e.g. random directions of an estimator).
pub fn purpose_rng(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    block_rng(seed, purpose, u64::MAX)
}
