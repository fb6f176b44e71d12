//! Deterministic derived RNG streams.
//!
//! Every random decision in the crate draws from a ChaCha8 stream whose key is
//! derived from the user seed plus a path of integer tags (chain id, sweep
//! index, unit index, phase, ...). Deriving independent streams instead of
//! sharing one sequential generator is what makes parallel execution
//! bit-identical to serial execution: the draws a given update consumes do not
//! depend on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Phase tags keeping unrelated streams disjoint. Values are arbitrary but
/// frozen: changing them changes every seeded result.
pub mod tags {
    pub const INIT: u64 = 0x01;
    pub const COUNTS: u64 = 0x02;
    pub const OMEGA: u64 = 0x03;
    pub const HYPER: u64 = 0x04;
    pub const SIM_UNIT: u64 = 0x11;
    pub const SELECT: u64 = 0x12;
    pub const SURVEY: u64 = 0x13;
    pub const REPLICATE: u64 = 0x21;
    pub const IMPUTE: u64 = 0x22;
}

/// SplitMix64 finalizer; good avalanche, stable across platforms.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a tag path into a single 64-bit key.
#[inline]
pub fn derive_key(seed: u64, path: &[u64]) -> u64 {
    let mut s = mix(seed);
    for &t in path {
        s = mix(s ^ t.wrapping_mul(0xD134_2543_DE82_EF95));
    }
    s
}

/// ChaCha8 stream for `(seed, path)`. Distinct paths give independent streams.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let k = derive_key(seed, path);
    let mut key = [0u8; 32];
    let mut x = k;
    for chunk in key.chunks_exact_mut(8) {
        x = mix(x);
        chunk.copy_from_slice(&x.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
