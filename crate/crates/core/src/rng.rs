//! Seed handling. One master seed drives a run; each consumer derives its own
//! stream from a stable label so adding a consumer never shifts another's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::digest;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed for the named stream.
pub fn derive_seed(master: u64, stream: &str) -> u64 {
    let mut bytes = master.to_le_bytes().to_vec();
    bytes.extend_from_slice(stream.as_bytes());
    splitmix64(digest(&bytes).0)
}

/// Derives a sub-seed for element `index` of the named stream.
pub fn derive_indexed(master: u64, stream: &str, index: u64) -> u64 {
    splitmix64(derive_seed(master, stream) ^ splitmix64(index))
}

pub fn stream(master: u64, name: &str) -> SimRng {
    seeded(derive_seed(master, name))
}

pub fn indexed_stream(master: u64, name: &str, index: u64) -> SimRng {
    seeded(derive_indexed(master, name, index))
}
