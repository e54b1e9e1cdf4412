//! Per-trial random streams.
//!
//! Every trial draws from a ChaCha8 stream keyed on `(master_seed, point)` and
//! selected by the trial index, so a trial's randomness depends only on its
//! coordinates and never on which worker ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform double in `[0, 1)` from the top 53 bits of a word.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The stream for trial `trial` of grid point `point`.
pub fn trial_stream(master_seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(master_seed) ^ splitmix64(point.wrapping_add(0xD1B5_4A32_D192_ED03));
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut r = trial_stream(7, 1, 3);
        let a: Vec<u64> = (0..4).map(|_| r.next_u64()).collect();
        let mut r = trial_stream(7, 1, 3);
        let b: Vec<u64> = (0..4).map(|_| r.next_u64()).collect();
        assert_eq!(a, b);
        let mut other_trial = trial_stream(7, 1, 4);
        let mut other_point = trial_stream(7, 2, 3);
        let mut other_seed = trial_stream(8, 1, 3);
        assert_ne!(a[0], other_trial.next_u64());
        assert_ne!(a[0], other_point.next_u64());
        assert_ne!(a[0], other_seed.next_u64());
    }

    #[test]
    fn unit_interval() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }
}
