//! Campaign runner and real-time gateway behind the `barrier-fleet` binary.

pub mod batch;
pub mod config;
pub mod gateway;
