//! Counter-based seed derivation.
//!
//! Every random draw in a run is addressed by `(seed, stream, a, b)`. The
//! address is hashed into a 256-bit ChaCha key, so any block (a DRM for slot
//! `t` at device `k`, the channel of that device, the receiver noise of that
//! slot) can be regenerated independently without shared generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named substreams. The discriminant is mixed into the key, so equal
/// counters in different streams give unrelated sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Trial = 1,
    Data = 2,
    Partition = 3,
    Drm = 4,
    Channel = 5,
    Noise = 6,
    PayloadChannel = 7,
    PayloadNoise = 8,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit child seed from a parent seed and a counter pair.
pub fn derive_seed(seed: u64, stream: Stream, a: u64, b: u64) -> u64 {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for word in [stream as u64, a, b] {
        state ^= word.wrapping_mul(GOLDEN) ^ acc;
        acc = splitmix64(&mut state);
    }
    acc
}

/// Generator for the substream addressed by `(seed, stream, a, b)`.
pub fn substream(seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    let mut state = derive_seed(seed, stream, a, b);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
