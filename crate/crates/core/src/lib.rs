//! Deterministic simulator for Byzantine-resilient federated optimization
//! with a two-time-scale local SGD rule and comparative-elimination
//! filtering on the server.
//!
//! The crate is organized around the protocol's moving parts:
//!
//! - [`objectives`]: objective families, gradient oracles, data models,
//!   and curvature constants;
//! - [`schedule`]: the decaying two-time-scale step sizes and every
//!   parameter-condition validator;
//! - [`agents`]: the T-step local loop with tracker carryover plus the
//!   attack models;
//! - [`server`]: the comparative-elimination filter and survivor
//!   averaging;
//! - [`simulator`]: round orchestration, Monte Carlo replication, metric
//!   series, theorem bounds;
//! - [`audit`]: pathwise re-evaluation of the per-round inequalities the
//!   analysis relies on;
//! - [`cli`]: config files, presets, CSV/manifest output.

pub mod agents;
pub mod audit;
pub mod cli;
pub mod error;
pub mod objectives;
pub mod point;
pub mod ratefit;
pub mod rng;
pub mod schedule;
pub mod server;
pub mod simulator;

pub use error::{Error, Result};
pub use point::Point;
