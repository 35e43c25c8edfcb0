//! Replicate-indexed random streams.
//!
//! A replicate of scenario `s` at sample size `n` under master seed `m` uses
//! `ChaCha8Rng::seed_from_u64(key(m, s, n))` with stream number equal to the
//! replicate index, where `key` folds the seed, the FNV-1a hash of the scenario
//! name and `n` through the SplitMix64 finalizer. Any replicate can therefore
//! be regenerated on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Master seed of the censoring calibration draws.
pub const CALIBRATION_SEED: u64 = 0x00C0_FFEE;
/// Master seed of the calibration validation draws.
pub const VALIDATION_SEED: u64 = 0x0BAD_5EED;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_key(master_seed: u64, scenario: &str, n: usize) -> u64 {
    mix(mix(mix(master_seed) ^ fnv1a(scenario.as_bytes())) ^ n as u64)
}

pub fn replicate_rng(master_seed: u64, scenario: &str, n: usize, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_key(master_seed, scenario, n));
    rng.set_stream(replicate);
    rng
}
