//! Seed derivation. Trials get splitmix-mixed seeds; traces within a trial use
//! `trial_seed ^ trace_index` as the seed of their own ChaCha8 stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TraceRng = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of one experiment trial, distinct for each `(trace_count, trial)`.
pub fn trial_seed(master: u64, trace_count: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ trace_count as u64) ^ trial as u64)
}

/// Stream for the `index`-th trace drawn under `seed`.
pub fn trace_rng(seed: u64, index: usize) -> TraceRng {
    ChaCha8Rng::seed_from_u64(seed ^ index as u64)
}

pub fn rng_from_seed(seed: u64) -> TraceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn trial_seeds_do_not_collide() {
        let mut seen = HashSet::new();
        for t in [1usize, 10, 100, 1000] {
            for trial in 0..500 {
                assert!(seen.insert(trial_seed(7, t, trial)));
            }
        }
    }
}
