//! Sequential testing and isolation on contact networks.
//!
//! The crate simulates a stochastic S/L/I/R spread over a (possibly
//! time-varying) contact network, maintains per-node beliefs about hidden
//! states from daily test results, scores candidate test sets with a
//! supermodular expected-infection objective, and runs testing policies
//! inside a seeded experiment harness.

pub mod belief;
pub mod config;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod objective;
pub mod policies;
pub mod spread;

pub use error::{Error, Result};
