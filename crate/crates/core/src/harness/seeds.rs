//! Per-trial seed derivation. Seeds depend only on the base seed, the grid
//! point and the trial index, never on scheduling.

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn trial_seed(base: u64, snr_index: usize, sigma_index: usize, trial: u64) -> u64 {
    [snr_index as u64, sigma_index as u64, trial]
        .iter()
        .fold(splitmix64(base), |acc, v| splitmix64(acc ^ splitmix64(*v)))
}
