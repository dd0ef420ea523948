//! Counter-based seed splitting.
//!
//! Every random stream in a run is keyed by `(master, stream, index)`:
//!
//! ```text
//! derive_seed(m, s, i) = mix(mix(m ^ mix(s)) ^ i)
//! ```
//!
//! where `mix` is the SplitMix64 output function applied to
//! `x + 0x9E3779B97F4A7C15`. The seed of a grid point depends only on its
//! coordinates, never on iteration order.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream id for random Rx placement.
pub const STREAM_PLACEMENT: u64 = 0x504C_4143;
/// Stream id for per-link trace seeds (diffuse sampling).
pub const STREAM_TRACE: u64 = 0x5452_4143;

pub fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix(mix(master ^ mix(stream)) ^ index)
}
