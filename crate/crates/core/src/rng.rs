//! Seeded, stream-splittable randomness.
//!
//! Every random quantity is drawn from a ChaCha8 stream selected by
//! `(seed, stream index)`, so results never depend on how work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) type StreamKey = [u8; 32];

pub(crate) fn stream_key(seed: u64) -> StreamKey {
    let mut bytes = [0u8; 32];
    ChaCha8Rng::seed_from_u64(seed).fill(&mut bytes);
    bytes
}

pub(crate) fn stream(key: &StreamKey, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(index);
    rng
}

/// SplitMix64 finalizer, used to fold labels into a seed.
pub(crate) fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a seed from a base seed and a list of labels (e.g. detector indices).
pub(crate) fn derive_seed(seed: u64, labels: &[usize]) -> u64 {
    labels.iter().fold(mix(seed), |acc, &l| mix(acc ^ l as u64))
}
