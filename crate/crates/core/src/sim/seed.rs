//! Per-run seed derivation.
//!
//! Run `i` of a batch with master seed `m` uses
//! `splitmix64(m ^ splitmix64(i + 0x9E3779B97F4A7C15))`. The seed does not
//! depend on the strategy, so every strategy in a batch sees the same reward
//! streams run by run.

/// One step of the SplitMix64 generator (Steele, Lea and Flood).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_seed(master: u64, run: u64) -> u64 {
    splitmix64(master ^ splitmix64(run.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}
