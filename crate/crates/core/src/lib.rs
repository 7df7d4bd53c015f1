//! Analysis core for a monostatic massive-MIMO ISAC base station.
//!
//! A base station with an `N_t`-element transmit UPA serves `K` single-antenna
//! users with MRT or ZF precoding while a dedicated sensing beam illuminates a
//! point target. The radar echo is received on a co-located `N_r`-element UPA.
//!
//! The crate provides:
//!
//! * steering vectors and their angle derivatives ([`geometry`]),
//! * large-scale fading and MMSE estimate statistics ([`channel`]),
//! * precoder construction and transmit power accounting ([`precoding`]),
//! * closed-form and Monte-Carlo achievable rates ([`rate`]),
//! * Fisher information, CRLBs, echo synthesis and the MLE ([`sensing`]),
//! * a small dense log-barrier SOCP solver ([`socp`]),
//! * SCA power allocation and the benchmark allocations ([`sca`]).
//!
//! Everything builds without `std` (an allocator is required).

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod channel;
pub mod error;
pub mod geometry;
pub mod precoding;
pub mod rate;
pub mod rng;
pub mod sca;
pub mod sensing;
pub mod socp;
pub mod sum;

pub use channel::{ChannelRealization, LargeScaleSet, SystemConfig};
pub use error::{Error, Result};
pub use geometry::{Angles, SteeringVector, UpaSpec};
pub use precoding::{PowerAllocation, PrecoderSet, Scheme};
pub use rate::RateReport;
pub use sca::{InitPolicy, ScaConfig, ScaTrace};
pub use sensing::{CrlbPair, FisherBlocks};

pub use num_complex::Complex64;

/// Converts a value in dB to linear scale.
pub fn db_to_lin(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// Converts a positive linear value to dB.
pub fn lin_to_db(x: f64) -> f64 {
    10.0 * libm::log10(x)
}
