//! Closed-loop, gradient-free calibration of simulated spin-qubit devices.
//!
//! The crate is organised around the calibration loop:
//!
//! * [`optimizer`]: CMA-ES as an ask/tell state machine over normalized coordinates.
//! * [`quantum_sim`]: effective double-quantum-dot model used to simulate
//!   initialization ramps, plus the two-tone conveyor pulse.
//! * [`backends`]: simulated devices exposing readout, shuttling and
//!   randomized-benchmarking cost functions over named physical parameters.
//! * [`analysis`]: curve fits, first-order HDMR sensitivity and covariance
//!   averaging for post-hoc interpretation of runs.
//! * [`harness`]: run orchestration, persistence and export.

pub mod analysis;
pub mod backends;
pub mod benchmarks;
pub mod error;
pub mod harness;
pub mod optimizer;
pub mod quantum_sim;
pub mod rng;

pub use error::{Error, Result};
pub use optimizer::{Bounds, Candidate, CovarianceSnapshot, DistributionState, StrategyParams};
pub use backends::{CostEvaluation, ParameterSpace};
