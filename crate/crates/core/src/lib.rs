//! Physical-layer simulator for 25G/50G IM/DD passive optical networks.
//!
//! The link chain is PRBS → symbol mapping → MZM pre-distortion → TX
//! low-pass → chirp-free MZM → dispersive fiber → VOA → APD/TIA → RX
//! low-pass → decimation to 2 sps → FFE-LMS → decision → BER counting. [`metrics`] wraps the
//! chain into BER and sensitivity evaluations of a [`metrics::LinkScenario`].

pub mod equalize;
pub mod error;
pub mod fiber;
pub mod filter;
pub mod metrics;
pub mod rx;
pub mod signal;
pub mod tx;

pub use error::{Error, Result};
