//! Seed derivation.
//!
//! Every random stream in the crate is keyed by a `(root seed, component tag)`
//! pair so that a single root seed in a run manifest reproduces all outputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of a named component stream from a root seed.
pub fn derive_seed(root: u64, tag: &str) -> u64 {
    mix64(root ^ fnv1a(tag.as_bytes()))
}

/// Derive the seed of the `index`-th member of a component family.
pub fn derive_indexed(root: u64, tag: &str, index: u64) -> u64 {
    mix64(derive_seed(root, tag) ^ mix64(index))
}

pub fn rng_for(root: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tag))
}

pub fn rng_indexed(root: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_indexed(root, tag, index))
}
