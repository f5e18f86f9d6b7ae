// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Time evolution under piecewise-constant controls.
//!
//! Pure states evolve under `exp(−iG·τ)` where `G` is the effective
//! (non-Hermitian) generator of the current interval; the exponential is
//! applied to the vector with a scaled Taylor series. Density matrices and
//! their adjoint co-states are integrated with fixed-substep RK4.

mod density;
mod mcwf;

pub use density::{
    backward_density_propagate, density_propagate, DensityOptions, DensityStepper,
};
pub use mcwf::{backward_mcwf, mcwf_propagate, Jump, JumpPropagator, Trajectory};

use crate::error::{check_dim, Error, Result};
use crate::network::{ControlField, NetworkModel};
use crate::quantum::{Operator, StateVector, C64, I, ZERO};
use crate::rng::Direction;

/// `H_eff = H − (i/2) Σ_l L_l†L_l`.
pub fn effective_hamiltonian(h: &Operator, lindblads: &[Operator]) -> Result<Operator> {
    let mut h_eff = h.clone();
    for l in lindblads {
        check_dim("effective Hamiltonian", h.dim(), l.dim())?;
        let ldl = l.adjoint().matmul(l)?;
        h_eff = h_eff.add_scaled(&ldl, C64::new(0.0, -0.5))?;
    }
    Ok(h_eff)
}

/// Drift, linear control operators and jump operators of an open system.
///
/// Precomputes the effective generators for both propagation directions:
/// forward `G = H_eff`, backward `G = −H_eff†` so that one interval of the
/// co-state is `χ(t_{j−1}) = exp(−iG·dt) χ(t_j)`.
#[derive(Debug, Clone)]
pub struct OpenSystem {
    drift: Operator,
    controls: Vec<Operator>,
    lindblads: Vec<Operator>,
    lindblads_adj: Vec<Operator>,
    forward_drift: Operator,
    backward_drift: Operator,
    backward_controls: Vec<Operator>,
}

impl OpenSystem {
    pub fn new(drift: Operator, controls: Vec<Operator>, lindblads: Vec<Operator>) -> Result<Self> {
        let d = drift.dim();
        for op in controls.iter().chain(&lindblads) {
            check_dim("open system operators", d, op.dim())?;
        }
        let forward_drift = effective_hamiltonian(&drift, &lindblads)?;
        let backward_drift = forward_drift.adjoint().scaled(C64::new(-1.0, 0.0));
        let backward_controls = controls
            .iter()
            .map(|mu| mu.adjoint().scaled(C64::new(-1.0, 0.0)))
            .collect();
        let lindblads_adj = lindblads.iter().map(Operator::adjoint).collect();
        Ok(Self {
            drift,
            controls,
            lindblads,
            lindblads_adj,
            forward_drift,
            backward_drift,
            backward_controls,
        })
    }

    pub fn from_model(model: &NetworkModel) -> Result<Self> {
        Self::new(
            model.drift.clone(),
            model.controls.clone(),
            model.lindblads.clone(),
        )
    }

    /// Same Hamiltonian with every jump operator removed.
    pub fn without_dissipation(&self) -> Self {
        Self::new(self.drift.clone(), self.controls.clone(), Vec::new())
            .expect("dimensions already validated")
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn drift(&self) -> &Operator {
        &self.drift
    }

    pub fn controls(&self) -> &[Operator] {
        &self.controls
    }

    pub fn lindblads(&self) -> &[Operator] {
        &self.lindblads
    }

    pub fn is_closed(&self) -> bool {
        self.lindblads.is_empty()
    }

    /// `H(u) = H_0 + Σ_i u_i μ_i`.
    pub fn hamiltonian(&self, values: &[f64]) -> Result<Operator> {
        check_dim("control values", self.controls.len(), values.len())?;
        let mut h = self.drift.clone();
        for (mu, &u) in self.controls.iter().zip(values) {
            h = h.add_scaled(mu, C64::new(u, 0.0))?;
        }
        Ok(h)
    }

    pub(crate) fn jump_operators(&self, direction: Direction) -> &[Operator] {
        match direction {
            Direction::Forward => &self.lindblads,
            Direction::Backward => &self.lindblads_adj,
        }
    }

    pub(crate) fn generator<'a>(&'a self, direction: Direction, values: &'a [f64]) -> Generator<'a> {
        debug_assert_eq!(values.len(), self.controls.len());
        match direction {
            Direction::Forward => Generator {
                base: &self.forward_drift,
                controls: &self.controls,
                values,
            },
            Direction::Backward => Generator {
                base: &self.backward_drift,
                controls: &self.backward_controls,
                values,
            },
        }
    }
}

/// `G = base + Σ_i values_i·controls_i`, applied without assembling `G`.
pub(crate) struct Generator<'a> {
    base: &'a Operator,
    controls: &'a [Operator],
    values: &'a [f64],
}

impl Generator<'_> {
    #[inline]
    fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        self.base.apply_into(x, out);
        for (mu, &u) in self.controls.iter().zip(self.values) {
            if u != 0.0 {
                mu.apply_add(C64::new(u, 0.0), x, out);
            }
        }
    }

    fn one_norm_bound(&self) -> f64 {
        self.base.one_norm()
            + self
                .controls
                .iter()
                .zip(self.values)
                .map(|(mu, u)| u.abs() * mu.one_norm())
                .sum::<f64>()
    }
}

const MAX_TAYLOR_TERMS: usize = 60;

/// Scratch buffers for [`expmv`].
#[derive(Debug, Clone)]
pub(crate) struct ExpWork {
    term: Vec<C64>,
    next: Vec<C64>,
}

impl ExpWork {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            term: vec![ZERO; dim],
            next: vec![ZERO; dim],
        }
    }
}

/// In-place `ψ ← exp(−iG·τ) ψ`.
///
/// `τ` is split into substeps with `‖G‖₁·τ_sub ≤ 1`; each substep sums the
/// Taylor series until the next term is below double precision relative to
/// the partial sum.
pub(crate) fn expmv(gen: &Generator<'_>, tau: f64, psi: &mut [C64], work: &mut ExpWork) {
    if tau == 0.0 {
        return;
    }
    let bound = gen.one_norm_bound() * tau.abs();
    let substeps = bound.ceil().max(1.0) as usize;
    let h = tau / substeps as f64;
    let factor = -I * h;
    for _ in 0..substeps {
        work.term.copy_from_slice(psi);
        for k in 1..=MAX_TAYLOR_TERMS {
            gen.apply_into(&work.term, &mut work.next);
            let scale = factor / k as f64;
            let mut term_max = 0.0_f64;
            let mut sum_max = 0.0_f64;
            for ((t, n), p) in work.term.iter_mut().zip(&work.next).zip(psi.iter_mut()) {
                *t = n * scale;
                *p += *t;
                term_max = term_max.max(t.norm_sqr());
                sum_max = sum_max.max(p.norm_sqr());
            }
            if term_max <= 1e-34 * sum_max || term_max == 0.0 {
                break;
            }
        }
    }
}

/// `exp(−i·H_eff·dt)·Ψ` for a fixed (possibly non-Hermitian) generator.
pub fn step_propagate_pure(psi: &StateVector, h_eff: &Operator, dt: f64) -> Result<StateVector> {
    check_dim("step propagation", h_eff.dim(), psi.dim())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let gen = Generator {
        base: h_eff,
        controls: &[],
        values: &[],
    };
    let mut out = psi.clone();
    let mut work = ExpWork::new(psi.dim());
    expmv(&gen, dt, out.amplitudes_mut(), &mut work);
    Ok(out)
}

/// Validates a control set against a system and returns `(n_t, dt)`.
pub(crate) fn check_controls(system: &OpenSystem, controls: &[ControlField]) -> Result<(usize, f64)> {
    check_dim("number of control fields", system.n_controls(), controls.len())?;
    let Some(first) = controls.first() else {
        return Err(Error::InvalidArgument("at least one control field is required".into()));
    };
    let n = first.n_steps();
    for c in controls {
        check_dim("control grid length", n, c.n_steps())?;
        if (c.duration - first.duration).abs() > 1e-12 * first.duration {
            return Err(Error::InvalidArgument("control fields have different durations".into()));
        }
    }
    if n < 1 {
        return Err(Error::InvalidArgument("control grid is empty".into()));
    }
    Ok((n, first.dt()))
}

/// Control values on interval `j`, one per field.
pub(crate) fn values_at(controls: &[ControlField], j: usize, out: &mut [f64]) {
    for (o, c) in out.iter_mut().zip(controls) {
        *o = c.values[j];
    }
}
