//! Stable seed derivation.
//!
//! Seeds are folded with the SplitMix64 finalizer, so derived streams do not
//! depend on the standard library's hasher and stay fixed across toolchains.

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of `parts`.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &p| mix(acc ^ mix(p)))
}

/// Seed of Monte-Carlo run `run` under `master`.
pub fn run_seed(master: u64, run: usize) -> u64 {
    derive_seed(&[master, run as u64])
}
