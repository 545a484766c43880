#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod analysis;
pub mod dataset;
pub mod edf;
pub mod evaluate;
pub mod features;
pub mod fft;
pub mod linalg;
pub mod models;
pub mod preprocess;
pub mod recording;
pub mod riemann;
pub mod signal;
pub mod synth;

/// Independent sub-seed `stream` of a master seed (SplitMix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
