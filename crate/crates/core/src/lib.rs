//! Training-aided carrier frequency offset estimation for MIMO-OFDM.
//!
//! The crate builds Chu-sequence training on disjoint subcarrier lattices,
//! simulates frequency-selective Rayleigh channels with a CFO, estimates the
//! CFO with a correlation-ratio estimator that avoids polynomial rooting,
//! predicts its MSE in closed form, and evaluates the channel-averaged
//! Cramer-Rao bound. [`harness`] drives seeded Monte Carlo campaigns.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod numerics;
pub mod training;

pub use error::{CfoError, Result};
pub use numerics::{ComplexMatrix, RandomSource, C64};
pub use training::{SystemConfig, TrainingKind, TrainingSet};
