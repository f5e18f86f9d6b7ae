// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the numerical kernels, propagators and optimizers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("trajectory annihilated: state has zero norm")]
    ZeroNorm,

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "jump-time bisection did not converge after {iterations} iterations \
         (interval {interval}, target norm² {target:.3e}, reached {reached:.3e})"
    )]
    BisectionFailed {
        interval: usize,
        iterations: usize,
        target: f64,
        reached: f64,
    },

    #[error("trace drift {drift:.3e} at grid point {step} exceeds tolerance; reduce the step size")]
    TraceDrift { step: usize, drift: f64 },

    #[error("non-finite pulse update for control {control} at interval {interval}")]
    NonFiniteUpdate { control: usize, interval: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
