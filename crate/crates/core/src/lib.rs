//! Stable-throughput regions of a source-relay-destination slotted
//! random-access network in which the relay accepts overheard source packets
//! through a probabilistic flow controller.
//!
//! * [`model`]: parameters, validation and derived constants.
//! * [`analytic`]: closed-form regions for a fixed acceptance probability,
//!   their closure and the optimal acceptance probability.
//! * [`sim`]: seeded slot-level simulation of the protocol, including the
//!   dummy-packet variants used to decouple the queues.
//! * [`harness`]: drift-based stability classification and plane sweeps that
//!   reconcile simulation with the analytic regions.
//! * [`cli`]: argument/config parsing and report generation.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod harness;
pub mod model;
pub mod sim;

pub use error::{Error, Result};
