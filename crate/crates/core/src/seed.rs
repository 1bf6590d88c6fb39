//! Deterministic seed derivation for Monte-Carlo trials.
//!
//! Trial `i` of an experiment with master seed `s` uses
//! `trial_seed(s, i) = splitmix64(s + (i + 1) * 0x9E3779B97F4A7C15)`.
//! Within a trial, independent sources of randomness draw from separate
//! ChaCha8 streams of that seed, so a covariance-only rerun of a trial sees
//! exactly the same matchings as the full simulation did.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream carrying the gossip matchings `A(t)`.
pub const MATCHING_STREAM: u64 = 0;
/// Stream carrying the signal and observation noises.
pub const NOISE_STREAM: u64 = 1;
/// Stream carrying the probed-sensor draw `q`.
pub const PROBE_STREAM: u64 = 2;
/// Stream carrying the auxiliary switching chain.
pub const CHAIN_STREAM: u64 = 3;
/// Stream carrying draws from a random initial measure.
pub const INIT_STREAM: u64 = 4;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix64(master.wrapping_add(trial.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
