//! Order-independent seed derivation.
//!
//! Every random stream is keyed by the master seed plus a path of labels
//! (measurement id, stage tag, segment index, ...). Streams never depend on
//! the order in which tasks execute, so results are identical for any
//! degree of parallelism.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a child seed from `parent` and one integer key.
pub fn derive(parent: u64, key: u64) -> u64 {
    mix64(parent ^ mix64(key))
}

/// Derives a child seed from `parent` and a string tag.
pub fn derive_tag(parent: u64, tag: &str) -> u64 {
    derive(parent, hash_str(tag))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
