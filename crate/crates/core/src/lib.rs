//! Bounds, capacity regions and simulation for the Gaussian cognitive
//! Z-interference channel.
//!
//! The [`bounds`] module turns channel parameters into constraint sets;
//! [`regions`] unions them into sampled frontiers and compares those. [`dm`]
//! evaluates the same coding theorems on small discrete alphabets, and [`mc`]
//! simulates the superposition scheme with finite blocklength codebooks.

pub mod bounds;
pub mod cli;
pub mod dm;
pub mod error;
pub mod mc;
pub mod model;
pub mod regions;

pub use error::{CzicError, Result};
pub use model::{ChannelParams, RegimeTag};
pub use regions::{ConstraintSet, Frontier, RatePair};

/// `0.5 * log2(x)`: the Gaussian capacity kernel in bits.
pub(crate) fn half_log2(x: f64) -> f64 {
    0.5 * x.log2()
}

/// Mixes a user seed with stream indices into an independent 64-bit seed
/// (splitmix64 finalizer applied per word).
pub(crate) fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    stream.iter().fold(mix(seed), |acc, &s| mix(acc ^ mix(s)))
}
