//! Deterministic derivation of sub-seeds from a base seed.
//!
//! Everything stochastic in the pipeline (user fields, placement search,
//! network initialization, exploration noise) draws from a seeded generator
//! whose seed is derived here, so a scenario's `rng_seed` reproduces the
//! whole run.

/// One round of the splitmix64 output function.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from `base` and two tag values.
///
/// Distinct `(domain, index)` pairs give statistically independent streams;
/// the same triple always gives the same seed.
pub fn derive_seed(base: u64, domain: u64, index: u64) -> u64 {
    let a = splitmix64(base ^ 0x243f_6a88_85a3_08d3);
    let b = splitmix64(a ^ domain);
    splitmix64(b ^ index)
}
