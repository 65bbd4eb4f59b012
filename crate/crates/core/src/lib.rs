//! Detection of asynchronous ambient-backscatter beacons that toggle
//! their reflection with a near-perfect binary code, observed through the
//! reference signals of an LTE downlink.
//!
//! The chain: [`channel::synthesize`] builds received RS samples,
//! [`detector::Receiver`] turns them into a combined contrast trace,
//! [`detector::np_threshold`] sets a false-alarm-controlled threshold and
//! [`detector::detect`] searches for a primary and a secondary tag.
//! [`harness`] wraps this in Monte Carlo experiments.

pub mod channel;
pub mod cli;
pub mod detector;
pub mod error;
pub mod harness;
pub mod scenario;
pub mod sequences;

pub use error::{Error, Result};
