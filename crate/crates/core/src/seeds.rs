//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a ChaCha generator seeded from a master
//! seed mixed with structural indices (series number, role tags, ...). Mixing
//! goes through SplitMix64 so nearby indices produce unrelated streams, and
//! the whole derivation is stable across platforms and releases.

/// SplitMix64 step: scrambles one 64-bit value.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a sequence of parts into one seed; order-sensitive.
pub fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x51F0_5E1E_C0FF_EE00u64;
    for &p in parts {
        acc = splitmix64(acc ^ p).wrapping_add(0x9E37_79B9_7F4A_7C15);
    }
    acc
}
