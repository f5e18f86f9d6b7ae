// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Reproducible random streams for trajectory sampling.
//!
//! Every stream is a ChaCha8 generator seeded from a 64-bit value, so the
//! sequence is identical on every platform. Per-trajectory seeds are derived
//! from `(base seed, iteration, trajectory, direction)` with a SplitMix64
//! finalizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for one trajectory of one optimizer iteration.
    pub fn derived(base: u64, iteration: u64, trajectory: u64, direction: Direction) -> Self {
        Self::new(stream_seed(base, iteration, trajectory, direction))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `base ⊕ hash(iteration, trajectory, direction)`.
pub fn stream_seed(base: u64, iteration: u64, trajectory: u64, direction: Direction) -> u64 {
    let dir = match direction {
        Direction::Forward => 0x5f,
        Direction::Backward => 0xb4,
    };
    let h = splitmix64(splitmix64(splitmix64(iteration) ^ trajectory) ^ dir);
    base ^ h
}
