//! Portable seeded random streams.
//!
//! Every stream is a ChaCha8 generator whose key comes from `(seed, key)` and
//! whose stream id selects an independent substream. Results therefore do not
//! depend on the platform, the thread count or the order users are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids used by the simulator and the bootstrap.
pub mod streams {
    pub const POPULATION: u64 = 1;
    pub const RESPONSES: u64 = 2;
    pub const EVENTS: u64 = 3;
    pub const BOOTSTRAP: u64 = 4;
    pub const REPLICATES: u64 = 5;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a hash, used to key streams by user id.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Generator for `(seed, key)` on substream `stream`.
pub fn substream(seed: u64, key: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(key)));
    rng.set_stream(stream);
    rng
}

/// Generator keyed by a user id.
pub fn user_stream(seed: u64, user_id: &str, stream: u64) -> ChaCha8Rng {
    substream(seed, fnv1a64(user_id.as_bytes()), stream)
}
