//! Command-line front end for the `ponsim` link simulator: scenario
//! configuration, parallel sensitivity sweeps to CSV, device-response
//! fitting and bundled reference tables.

pub mod app;
pub mod config;
pub mod error;
pub mod reference;
pub mod response;
pub mod sweep;

pub use error::{CliError, CliResult};
