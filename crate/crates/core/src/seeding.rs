//! Deterministic seed derivation for nested generation/evaluation streams.

/// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a path of stream indices.
///
/// Distinct paths give independent, reproducible streams; the same path
/// always yields the same seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut acc = splitmix64(base);
    for &part in path {
        acc = splitmix64(acc ^ splitmix64(part));
    }
    acc
}
