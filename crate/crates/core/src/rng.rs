//! Deterministic per-replication random streams.
//!
//! Replication `i` of a run with base seed `s` uses the stream seeded by
//! `stream_seed(s, i) = splitmix64(s ^ splitmix64(i))`. The 32-byte ChaCha8 key
//! is the next four outputs of the splitmix64 sequence started at that value,
//! little-endian. Results never depend on how replications are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One step of the splitmix64 finalizer applied to `x + golden`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn stream(seed: u64, index: u64) -> Stream {
    let mut state = stream_seed(seed, index);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(state).to_le_bytes());
        state = state.wrapping_add(GOLDEN);
    }
    ChaCha8Rng::from_seed(key)
}

/// Runs `n` independent replications in parallel, in index order.
pub fn replicate<T, F>(seed: u64, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut Stream) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            f(i, &mut rng)
        })
        .collect()
}
