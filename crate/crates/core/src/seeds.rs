//! Seed derivation for experiment cells.
//!
//! A seed is the SplitMix64 finalizer folded over the base seed and a tuple
//! of integers, so derived streams are identical on every platform.

pub const SPAWN_STREAM: u64 = 0x53_5041_574e;
pub const AGENT_STREAM: u64 = 0x41_4745_4e54;
pub const QTRAIN_STREAM: u64 = 0x5154_5241_494e;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Initial positions: shared by every agent kind for the same test slot.
pub fn spawn_seed(base: u64, n: usize, run: u32, test: u32) -> u64 {
    derive_seed(base, &[SPAWN_STREAM, n as u64, run as u64, test as u64])
}

pub fn agent_seed(base: u64, kind_index: u64, n: usize, run: u32, test: u32) -> u64 {
    derive_seed(
        base,
        &[AGENT_STREAM, kind_index, n as u64, run as u64, test as u64],
    )
}

pub fn qtrain_seed(base: u64) -> u64 {
    derive_seed(base, &[QTRAIN_STREAM])
}
