//! Seeded random streams.
//!
//! Every random decision in the pipeline draws from a stream derived from one
//! global seed plus a task label and integer keys (timestamp, area index, ...).
//! Workers never share a stream, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed, a task label and integer keys into a 64-bit stream seed.
pub fn derive_seed(seed: u64, task: &str, keys: &[i64]) -> u64 {
    let mut h = FNV_OFFSET ^ splitmix64(seed);
    for b in task.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    for k in keys {
        h = splitmix64(h ^ (*k as u64));
    }
    splitmix64(h)
}

/// Independent stream for `(seed, task, keys)`.
pub fn substream(seed: u64, task: &str, keys: &[i64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, task, keys))
}

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
