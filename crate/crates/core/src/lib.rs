//! Multi-agent road-crossing simulator for generating autonomous-vehicle
//! tests: a straight two-lane road, a car that never brakes, and pedestrian
//! agents that try to step in front of it while it can still stop.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod config;
pub mod coverage;
pub mod error;
pub mod harness;
pub mod mpc;
pub mod seeds;
pub mod world;

pub use error::{Result, SimError};
