//! Sub-seed derivation. Every random stream in a run is seeded with
//! `derive_seed(master, tag)`, where the tag names the consumer
//! (`"train/run2"`, `"probe/DisStat/3"`, ...).
//!
//! `derive_seed(master, tag) = splitmix64(master ^ fnv1a64(tag))`.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive_seed(master: u64, tag: &str) -> u64 {
    splitmix64(master ^ fnv1a64(tag.as_bytes()))
}

/// The `n` run seeds of the repeated-training protocol.
pub fn run_seeds(master: u64, n: usize) -> Vec<u64> {
    (0..n).map(|i| derive_seed(master, &format!("run/{i}"))).collect()
}
