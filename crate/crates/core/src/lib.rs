//! Joint information and energy beamforming for multi-user wireless
//! information and power transfer.
//!
//! The pipeline for one channel drop is: draw channels ([`channel`]), pick a
//! semi-orthogonal ID user set ([`scheduler`]), build zero-forcing beams and
//! steer them toward the energy receivers ([`beamformer`]), then score the
//! result ([`metrics`]). [`analysis`] holds the closed-form predictions,
//! [`oracle`] a numerical reference solver and [`harness`] the Monte Carlo
//! sweeps behind the `wipt` binary.

pub mod analysis;
pub mod beamformer;
pub mod channel;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod oracle;
pub mod scheduler;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
