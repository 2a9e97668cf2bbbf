//! Deterministic, seeded random streams.
//!
//! Every random draw in the crate comes from a counter-based ChaCha stream
//! keyed by `(seed, domain)`, where the domain tag separates independent
//! purposes (warp weights, frequency magnitudes, frequency phases, task
//! noise, subsampling, ...). Streams for different domains are statistically
//! independent, and a fixed `(seed, domain)` pair always reproduces the same
//! sequence, which is what the determinism contract requires. Bit-level
//! reproducibility across library versions is not promised, only within one
//! build.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. The numeric values are part of the serialization-free
/// determinism story: changing them changes every seeded run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Warp weight initialization (W row-major, then W_out row-major).
    WarpInit = 0,
    /// Frequency-bank magnitudes r_k.
    FreqMagnitude = 1,
    /// Frequency-bank phases theta_k (independent of the magnitudes).
    FreqPhase = 2,
    /// Mini-batch index sampling.
    Batch = 3,
    /// Task-generator observation noise.
    TaskNoise = 16,
    /// Task-generator lattice subsampling.
    TaskSample = 17,
    /// Acceptance/test instance generation.
    Test = 32,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mix a user seed with a domain tag and an extra index (e.g. block number)
/// into a full 256-bit ChaCha key.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = splitmix64(seed ^ splitmix64((domain as u64) << 32 | index));
    for chunk in key.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Per-block sub-seed used by the cascade so each block draws independent
/// warp weights and frequencies from the one user-facing seed.
pub fn block_seed(seed: u64, block_index: usize) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(block_index as u64 + 1)))
}
