// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Monte-Carlo wavefunction (quantum-jump) propagation.
//!
//! Between jumps the state evolves under the effective generator and its
//! norm decays. A jump fires when the squared norm reaches a uniformly drawn
//! threshold; the jump instant is located inside the time step by a
//! safeguarded false-position search on `ln‖ψ(τ)‖²`, so several jumps may
//! occur within one step.

use super::{check_controls, expmv, values_at, ExpWork, OpenSystem};
use crate::error::{check_dim, Error, Result};
use crate::quantum::{inner, StateVector, C64, ZERO};
use crate::rng::{Direction, RngStream};

const MAX_BISECTION_ITERATIONS: usize = 200;
const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub operator: usize,
}

/// One stochastic realization on the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Grid-point states, rescaled to the norm of the initial state
    /// (unit norm for forward trajectories). Index `j` is time `t_j`.
    pub states: Vec<StateVector>,
    /// Squared norm of the un-renormalized running state at each grid point,
    /// measured since the most recent jump.
    pub norms: Vec<f64>,
    /// Jumps in the order they occurred.
    pub jumps: Vec<Jump>,
    pub seed: u64,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory has at least one state")
    }

    /// Number of jumps that happened at or before `t`.
    pub fn jumps_until(&self, t: f64) -> usize {
        self.jumps.iter().filter(|j| j.time <= t).count()
    }
}

/// Resumable jump propagator, advanced one interval at a time.
///
/// The Krotov update pass needs every trajectory to stop at each grid point
/// until the pulse update for the next interval is known; this type carries
/// the running (sub-normalized) state, jump threshold and random stream
/// between calls.
#[derive(Debug, Clone)]
pub struct JumpPropagator<'a> {
    system: &'a OpenSystem,
    direction: Direction,
    state: Vec<C64>,
    scale: f64,
    threshold: f64,
    rng: RngStream,
    jumps: Vec<Jump>,
    annihilated: bool,
    work: ExpWork,
    trial: Vec<C64>,
    scratch: Vec<C64>,
}

impl<'a> JumpPropagator<'a> {
    /// Starts from `initial`. The state is normalized internally; reported
    /// states are scaled back by its norm. A zero state stays zero.
    pub fn new(
        system: &'a OpenSystem,
        direction: Direction,
        initial: &StateVector,
        mut rng: RngStream,
    ) -> Result<Self> {
        let d = system.dim();
        check_dim("jump propagator initial state", d, initial.dim())?;
        let norm = initial.norm();
        let annihilated = norm == 0.0;
        let state = if annihilated {
            vec![ZERO; d]
        } else {
            initial.amplitudes().iter().map(|a| a / norm).collect()
        };
        let threshold = rng.uniform();
        Ok(Self {
            system,
            direction,
            state,
            scale: norm,
            threshold,
            rng,
            jumps: Vec::new(),
            annihilated,
            work: ExpWork::new(d),
            trial: vec![ZERO; d],
            scratch: vec![ZERO; d],
        })
    }

    pub fn is_annihilated(&self) -> bool {
        self.annihilated
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Squared norm of the running state since the last jump.
    pub fn norm_sqr(&self) -> f64 {
        self.state.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Current state, renormalized and scaled to the initial norm.
    pub fn state(&self) -> StateVector {
        let mut out = StateVector::zeros(self.state.len());
        self.state_into(out.amplitudes_mut());
        out
    }

    pub fn state_into(&self, out: &mut [C64]) {
        if self.annihilated {
            out.fill(ZERO);
            return;
        }
        let f = self.scale / self.norm_sqr().sqrt();
        for (o, a) in out.iter_mut().zip(&self.state) {
            *o = a * f;
        }
    }

    /// Propagates over one interval of length `dt` with the given control
    /// values. `t_start` is the interval start in propagation order (the
    /// later grid point for backward propagation); it only labels jumps.
    pub fn advance(&mut self, values: &[f64], t_start: f64, dt: f64, interval: usize) -> Result<()> {
        if self.annihilated {
            return Ok(());
        }
        let gen = self.system.generator(self.direction, values);
        let jump_ops = self.system.jump_operators(self.direction);
        let sign = match self.direction {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        };
        let mut elapsed = 0.0;
        loop {
            let remaining = dt - elapsed;
            if remaining <= 0.0 {
                return Ok(());
            }
            self.trial.copy_from_slice(&self.state);
            expmv(&gen, remaining, &mut self.trial, &mut self.work);
            let n_end = norm_sqr(&self.trial);
            if jump_ops.is_empty() || n_end > self.threshold {
                std::mem::swap(&mut self.state, &mut self.trial);
                return Ok(());
            }

            // Locate τ ∈ (0, remaining] with ‖ψ(τ)‖² = threshold.
            let target = self.threshold;
            let ln_target = target.ln();
            let (mut lo, mut hi) = (0.0, remaining);
            let mut f_lo = norm_sqr(&self.state).ln() - ln_target;
            let mut f_hi = n_end.ln() - ln_target;
            let mut tau = hi;
            let mut converged = (n_end - target).abs() <= NORM_TOLERANCE * target;
            if f_lo <= 0.0 {
                tau = 0.0;
                self.trial.copy_from_slice(&self.state);
                converged = true;
            }
            let mut side = 0i8;
            let mut reached = n_end;
            let mut iterations = 0;
            while !converged {
                if iterations == MAX_BISECTION_ITERATIONS {
                    return Err(Error::BisectionFailed {
                        interval,
                        iterations,
                        target,
                        reached,
                    });
                }
                iterations += 1;
                let mut candidate = if f_lo.is_finite() && f_hi.is_finite() && f_lo != f_hi {
                    lo + (hi - lo) * f_lo / (f_lo - f_hi)
                } else {
                    0.5 * (lo + hi)
                };
                if !(candidate > lo && candidate < hi) {
                    candidate = 0.5 * (lo + hi);
                }
                tau = candidate;
                self.trial.copy_from_slice(&self.state);
                expmv(&gen, tau, &mut self.trial, &mut self.work);
                reached = norm_sqr(&self.trial);
                if (reached - target).abs() <= NORM_TOLERANCE * target || hi - lo <= f64::EPSILON * dt {
                    converged = true;
                    break;
                }
                let f_c = reached.ln() - ln_target;
                // Illinois modification keeps false position from stalling.
                if f_c > 0.0 {
                    lo = candidate;
                    f_lo = f_c;
                    if side == 1 {
                        f_hi *= 0.5;
                    }
                    side = 1;
                } else {
                    hi = candidate;
                    f_hi = f_c;
                    if side == -1 {
                        f_lo *= 0.5;
                    }
                    side = -1;
                }
            }
            debug_assert!(converged);
            elapsed += tau;
            std::mem::swap(&mut self.state, &mut self.trial);
            self.jump(jump_ops, t_start + sign * elapsed);
            if self.annihilated {
                return Ok(());
            }
        }
    }

    fn jump(&mut self, jump_ops: &[crate::quantum::Operator], time: f64) {
        let mut weights = Vec::with_capacity(jump_ops.len());
        for op in jump_ops {
            op.apply_into(&self.state, &mut self.scratch);
            weights.push(norm_sqr(&self.scratch));
        }
        let total: f64 = weights.iter().sum();
        let draw = self.rng.uniform() * total;
        let mut chosen = weights.len() - 1;
        let mut acc = 0.0;
        for (l, w) in weights.iter().enumerate() {
            acc += w;
            if draw < acc {
                chosen = l;
                break;
            }
        }
        self.jumps.push(Jump {
            time,
            operator: chosen,
        });
        if total <= 0.0 {
            self.annihilated = true;
            self.state.fill(ZERO);
            return;
        }
        jump_ops[chosen].apply_into(&self.state, &mut self.scratch);
        let norm = norm_sqr(&self.scratch).sqrt();
        for (s, v) in self.state.iter_mut().zip(&self.scratch) {
            *s = v / norm;
        }
        self.threshold = self.rng.uniform();
    }
}

#[inline]
fn norm_sqr(v: &[C64]) -> f64 {
    inner(v, v).re
}

/// Forward quantum-jump trajectory from a normalized initial state.
pub fn mcwf_propagate(
    system: &OpenSystem,
    psi0: &StateVector,
    controls: &[crate::network::ControlField],
    rng: RngStream,
) -> Result<Trajectory> {
    let (n, dt) = check_controls(system, controls)?;
    if (psi0.norm_sqr() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "initial trajectory state must be normalized, has norm² {}",
            psi0.norm_sqr()
        )));
    }
    let seed = rng.seed();
    let mut prop = JumpPropagator::new(system, Direction::Forward, psi0, rng)?;
    let mut states = Vec::with_capacity(n + 1);
    let mut norms = Vec::with_capacity(n + 1);
    states.push(prop.state());
    norms.push(prop.norm_sqr());
    let mut values = vec![0.0; controls.len()];
    for j in 0..n {
        values_at(controls, j, &mut values);
        prop.advance(&values, j as f64 * dt, dt, j)?;
        states.push(prop.state());
        norms.push(prop.norm_sqr());
    }
    Ok(Trajectory {
        states,
        norms,
        jumps: prop.jumps,
        seed,
    })
}

/// Backward co-state trajectory from `χ(T)` down to `t = 0` under `H_eff†`
/// with jump operators `L_l†`.
///
/// Reported states keep the norm of `χ(T)`; a jump whose operator
/// annihilates the state zeroes the co-state for all earlier times.
pub fn backward_mcwf(
    system: &OpenSystem,
    chi_t: &StateVector,
    controls: &[crate::network::ControlField],
    rng: RngStream,
) -> Result<Trajectory> {
    let (n, dt) = check_controls(system, controls)?;
    let seed = rng.seed();
    let mut prop = JumpPropagator::new(system, Direction::Backward, chi_t, rng)?;
    let mut states = vec![StateVector::zeros(system.dim()); n + 1];
    let mut norms = vec![0.0; n + 1];
    states[n] = prop.state();
    norms[n] = prop.norm_sqr();
    let mut values = vec![0.0; controls.len()];
    for j in (0..n).rev() {
        values_at(controls, j, &mut values);
        prop.advance(&values, (j + 1) as f64 * dt, dt, j)?;
        states[j] = prop.state();
        norms[j] = prop.norm_sqr();
    }
    Ok(Trajectory {
        states,
        norms,
        jumps: prop.jumps,
        seed,
    })
}
