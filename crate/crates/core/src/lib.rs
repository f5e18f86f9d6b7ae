// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Krotov optimal control of open quantum systems with quantum-jump
//! trajectories, applied to dark-state preparation in a cascaded cavity chain.
//!
//! - [`quantum`]: states, sparse operators, density matrices.
//! - [`network`]: the truncated single-excitation chain model.
//! - [`propagate`]: MCWF and Lindblad propagation, forward and adjoint.
//! - [`krotov`]: density-matrix, independent-trajectory and cross-trajectory
//!   optimizers.
//! - [`analysis`]: pulse-noise measures, power-law fits, dynamics records.

pub mod analysis;
pub mod checks;
pub mod error;
pub mod krotov;
pub mod network;
pub mod propagate;
pub mod quantum;
pub mod rng;

pub use error::{Error, Result};
