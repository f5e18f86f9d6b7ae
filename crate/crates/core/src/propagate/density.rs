// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Lindblad master equation and its adjoint, integrated with fixed-substep
//! RK4 on piecewise-constant controls.
//!
//! Forward:  `dρ/dt = −i(H_eff ρ − ρ H_eff†) + Σ L ρ L†`
//! Backward: `dP/d(−t) = i(H_eff† P − P H_eff) + Σ L† P L`
//!
//! Both right-hand sides are evaluated as `∓i(X − X†) + jumps` with
//! `X = G·ρ`, which relies on the propagated matrix being Hermitian. RK4
//! preserves hermiticity, so only the inputs are checked.

use super::{check_controls, values_at, OpenSystem};
use crate::error::{Error, Result};
use crate::network::ControlField;
use crate::quantum::{DensityMatrix, Operator, C64, I, ONE, ZERO};
use crate::rng::Direction;

const HERMITIAN_INPUT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOptions {
    /// RK4 substeps per control interval.
    pub substeps: usize,
    /// Largest tolerated `|tr ρ(t) − tr ρ(0)|` in forward propagation.
    pub trace_tolerance: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            substeps: 10,
            trace_tolerance: 1e-6,
        }
    }
}

/// Reusable RK4 integrator with preallocated stage buffers.
#[derive(Debug, Clone)]
pub struct DensityStepper<'a> {
    rhs: Rhs<'a>,
    substeps: usize,
    k: [Vec<C64>; 4],
    stage: Vec<C64>,
}

#[derive(Debug, Clone)]
struct Rhs<'a> {
    system: &'a OpenSystem,
    backward_drift: Operator,
    x: Vec<C64>,
}

impl Rhs<'_> {
    fn eval(&mut self, m: &[C64], values: &[f64], direction: Direction, out: &mut [C64]) {
        let d = self.system.dim();
        let (base, phase) = match direction {
            Direction::Forward => (&self.system.forward_drift, -I),
            Direction::Backward => (&self.backward_drift, I),
        };
        self.x.fill(ZERO);
        base.mul_dense_add(ONE, m, &mut self.x);
        for (mu, &u) in self.system.controls().iter().zip(values) {
            if u != 0.0 {
                // Control operators are Hermitian, so μ† = μ in both directions.
                mu.mul_dense_add(C64::new(u, 0.0), m, &mut self.x);
            }
        }
        for r in 0..d {
            for c in 0..d {
                out[r * d + c] = phase * (self.x[r * d + c] - self.x[c * d + r].conj());
            }
        }
        for l in self.system.jump_operators(direction) {
            l.sandwich_add(ONE, m, out);
        }
    }
}

impl<'a> DensityStepper<'a> {
    pub fn new(system: &'a OpenSystem, substeps: usize) -> Self {
        let d2 = system.dim() * system.dim();
        let buf = || vec![ZERO; d2];
        Self {
            rhs: Rhs {
                system,
                backward_drift: system.forward_drift.adjoint(),
                x: buf(),
            },
            substeps: substeps.max(1),
            k: [buf(), buf(), buf(), buf()],
            stage: buf(),
        }
    }

    /// One control interval forward in time.
    pub fn step_forward(&mut self, rho: &mut DensityMatrix, values: &[f64], dt: f64) {
        self.step(rho, values, dt, Direction::Forward);
    }

    /// One control interval backward in time for the adjoint co-state.
    pub fn step_backward(&mut self, p: &mut DensityMatrix, values: &[f64], dt: f64) {
        self.step(p, values, dt, Direction::Backward);
    }

    fn step(&mut self, m: &mut DensityMatrix, values: &[f64], dt: f64, direction: Direction) {
        let h = dt / self.substeps as f64;
        for _ in 0..self.substeps {
            self.rk4(m.data_mut(), values, h, direction);
        }
    }

    fn rk4(&mut self, y: &mut [C64], values: &[f64], h: f64, direction: Direction) {
        let [k1, k2, k3, k4] = &mut self.k;
        let stage = &mut self.stage;
        self.rhs.eval(y, values, direction, k1);
        axpy_into(stage, y, 0.5 * h, k1);
        self.rhs.eval(stage, values, direction, k2);
        axpy_into(stage, y, 0.5 * h, k2);
        self.rhs.eval(stage, values, direction, k3);
        axpy_into(stage, y, h, k3);
        self.rhs.eval(stage, values, direction, k4);
        let sixth = h / 6.0;
        for i in 0..y.len() {
            y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * sixth;
        }
    }
}

fn axpy_into(out: &mut [C64], y: &[C64], a: f64, x: &[C64]) {
    for ((o, yi), xi) in out.iter_mut().zip(y).zip(x) {
        *o = yi + a * xi;
    }
}

fn check_hermitian_input(m: &DensityMatrix, what: &str) -> Result<()> {
    let dev = m.hermiticity_deviation();
    if dev > HERMITIAN_INPUT_TOL {
        return Err(Error::InvalidArgument(format!(
            "{what} must be Hermitian (deviation {dev:.3e})"
        )));
    }
    Ok(())
}

fn check_hermitian_controls(system: &OpenSystem) -> Result<()> {
    if let Some(i) = system.controls().iter().position(|mu| !mu.is_hermitian()) {
        return Err(Error::InvalidArgument(format!(
            "control operator {i} is not Hermitian"
        )));
    }
    Ok(())
}

/// Forward master-equation history `ρ(t_j)`, `j = 0..=n_t`.
pub fn density_propagate(
    system: &OpenSystem,
    rho0: &DensityMatrix,
    controls: &[ControlField],
    options: &DensityOptions,
) -> Result<Vec<DensityMatrix>> {
    let (n, dt) = check_controls(system, controls)?;
    crate::error::check_dim("initial density matrix", system.dim(), rho0.dim())?;
    check_hermitian_input(rho0, "initial density matrix")?;
    check_hermitian_controls(system)?;
    let trace0 = rho0.trace().re;
    let mut stepper = DensityStepper::new(system, options.substeps);
    let mut values = vec![0.0; controls.len()];
    let mut history = Vec::with_capacity(n + 1);
    let mut rho = rho0.clone();
    history.push(rho.clone());
    for j in 0..n {
        values_at(controls, j, &mut values);
        stepper.step_forward(&mut rho, &values, dt);
        let drift = (rho.trace() - trace0).norm();
        if !(drift <= options.trace_tolerance) {
            return Err(Error::TraceDrift { step: j + 1, drift });
        }
        history.push(rho.clone());
    }
    Ok(history)
}

/// Adjoint co-state history `P(t_j)`, `j = 0..=n_t`, from `P(T) = p_t`.
pub fn backward_density_propagate(
    system: &OpenSystem,
    p_t: &DensityMatrix,
    controls: &[ControlField],
    options: &DensityOptions,
) -> Result<Vec<DensityMatrix>> {
    let (n, dt) = check_controls(system, controls)?;
    crate::error::check_dim("terminal co-state", system.dim(), p_t.dim())?;
    check_hermitian_input(p_t, "terminal co-state")?;
    check_hermitian_controls(system)?;
    let mut stepper = DensityStepper::new(system, options.substeps);
    let mut values = vec![0.0; controls.len()];
    let mut history = vec![DensityMatrix::zeros(system.dim()); n + 1];
    let mut p = p_t.clone();
    history[n] = p.clone();
    for j in (0..n).rev() {
        values_at(controls, j, &mut values);
        stepper.step_backward(&mut p, &values, dt);
        if p.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::TraceDrift {
                step: j,
                drift: f64::INFINITY,
            });
        }
        history[j] = p.clone();
    }
    Ok(history)
}
