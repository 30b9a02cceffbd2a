//! Deterministic random stream derivation.
//!
//! Every replication of every experiment owns a ChaCha8 stream keyed by a
//! path of integers (base seed, check id, replication index, ...). The key is
//! a pure function of the path, so results do not depend on how replications
//! are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds a stream from a base seed and a path of labels.
pub fn derive_stream(seed: u64, path: &[u64]) -> Stream {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for &label in path {
        state ^= acc.rotate_left(17) ^ label;
        acc = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Seeds a fresh stream from the next 64 bits of a parent stream.
pub fn child_stream<R: RngCore + ?Sized>(parent: &mut R) -> Stream {
    let seed = parent.next_u64();
    derive_stream(seed, &[])
}

/// Stable 64-bit label for a string, used to key streams by check name.
pub fn label(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
