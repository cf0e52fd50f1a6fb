//! Deterministic stream splitting.
//!
//! Every random quantity in a campaign is drawn from its own generator,
//! keyed by the master seed and a path of indices (SNR point, trial, user,
//! real dimension, purpose). Results therefore do not depend on how trials
//! are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep streams for different quantities disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Channel = 1,
    Bits = 2,
    Noise = 3,
    Sequence = 4,
    Psd = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for the stream identified by `seed`, `purpose` and `path`.
pub fn stream_rng(seed: u64, purpose: Stream, path: &[u64]) -> ChaCha8Rng {
    let mut key = splitmix64(seed ^ 0x5A5A_0000_0000_0000);
    key = splitmix64(key ^ purpose as u64);
    for &p in path {
        key = splitmix64(key ^ p.wrapping_mul(0x2545_F491_4F6C_DD1D));
    }
    ChaCha8Rng::seed_from_u64(key)
}
