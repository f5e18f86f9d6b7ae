// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Cascaded chain of cavities, each holding an effective two-level atom,
//! truncated to the vacuum plus the single-excitation subspace.
//!
//! Basis ordering is `[vac, atom₁, cav₁, atom₂, cav₂, …]`. Node indices in
//! this module are zero-based: node `i` has its atom at `2i + 1` and its
//! cavity at `2i + 2`.

use std::f64::consts::PI;

use crate::error::{check_dim, Error, Result};
use crate::quantum::{Operator, StateVector, C64, ONE};

/// Physical parameters of an `N`-node chain, in units of `g` (ħ = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub n_nodes: usize,
    pub g: f64,
    pub delta: f64,
    pub kappa: f64,
    pub duration: f64,
    pub n_steps: usize,
}

impl NetworkSpec {
    /// Two nodes, `T = 5`, `Δ = 100`, `κ = 1`.
    pub fn two_node() -> Self {
        Self {
            n_nodes: 2,
            g: 1.0,
            delta: 100.0,
            kappa: 1.0,
            duration: 5.0,
            n_steps: 1000,
        }
    }

    /// Twenty nodes, `T = 50`, `Δ = 100`, `κ = 1`.
    pub fn twenty_node() -> Self {
        Self {
            n_nodes: 20,
            duration: 50.0,
            n_steps: 5000,
            ..Self::two_node()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_nodes == 0 {
            return fail("n_nodes must be positive".into());
        }
        for (name, value) in [
            ("g", self.g),
            ("delta", self.delta),
            ("kappa", self.kappa),
            ("duration", self.duration),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return fail(format!("{name} must be positive and finite, got {value}"));
            }
        }
        if self.n_steps < 2 {
            return fail(format!("n_steps must be at least 2, got {}", self.n_steps));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * self.n_nodes + 1
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.n_steps as f64
    }

    /// Grid points `t_j = j·T/n_t`, `j = 0..=n_t`.
    pub fn time_grid(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.n_steps).map(|j| j as f64 * dt).collect()
    }

    /// Interval midpoints, where piecewise-constant controls are sampled.
    pub fn midpoints(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n_steps).map(|j| (j as f64 + 0.5) * dt).collect()
    }

    pub fn atom_index(&self, node: usize) -> usize {
        2 * node + 1
    }

    pub fn cavity_index(&self, node: usize) -> usize {
        2 * node + 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisLabel {
    Vacuum,
    Atom(usize),
    Cavity(usize),
}

impl std::fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisLabel::Vacuum => write!(f, "vac"),
            BasisLabel::Atom(i) => write!(f, "atom{}", i + 1),
            BasisLabel::Cavity(i) => write!(f, "cav{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub labels: Vec<BasisLabel>,
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }
}

pub fn build_basis(spec: &NetworkSpec) -> Basis {
    let mut labels = vec![BasisLabel::Vacuum];
    for i in 0..spec.n_nodes {
        labels.push(BasisLabel::Atom(i));
        labels.push(BasisLabel::Cavity(i));
    }
    Basis { labels }
}

/// Control-independent part of the Hamiltonian: the field-mediated
/// `iκ a_i†a_j + h.c.` couplings for all `i < j`. The Stark-shift
/// compensated node drift vanishes on this subspace.
pub fn drift_hamiltonian(spec: &NetworkSpec) -> Operator {
    let mut triplets = Vec::new();
    for i in 0..spec.n_nodes {
        for j in (i + 1)..spec.n_nodes {
            let (ci, cj) = (spec.cavity_index(i), spec.cavity_index(j));
            triplets.push((ci, cj, C64::new(0.0, spec.kappa)));
            triplets.push((cj, ci, C64::new(0.0, -spec.kappa)));
        }
    }
    Operator::from_triplets(spec.dim(), triplets)
}

/// `∂H/∂Ω_i`: the driven Jaynes-Cummings coupling of node `i` per unit drive.
pub fn control_operator(spec: &NetworkSpec, node: usize) -> Operator {
    let coupling = spec.g / (2.0 * spec.delta);
    let (atom, cav) = (spec.atom_index(node), spec.cavity_index(node));
    Operator::from_triplets(
        spec.dim(),
        [
            (atom, cav, C64::new(0.0, -coupling)),
            (cav, atom, C64::new(0.0, coupling)),
        ],
    )
}

pub fn control_operators(spec: &NetworkSpec) -> Vec<Operator> {
    (0..spec.n_nodes).map(|i| control_operator(spec, i)).collect()
}

/// Full Hamiltonian for fixed drive amplitudes, one per node.
pub fn build_hamiltonian(spec: &NetworkSpec, omegas: &[f64]) -> Result<Operator> {
    spec.validate()?;
    check_dim("drive amplitudes", spec.n_nodes, omegas.len())?;
    let mut h = drift_hamiltonian(spec);
    for (i, &omega) in omegas.iter().enumerate() {
        h = h.add_scaled(&control_operator(spec, i), C64::new(omega, 0.0))?;
    }
    Ok(h)
}

/// Lowering operator of cavity `node` on the truncated basis.
pub fn cavity_lowering(spec: &NetworkSpec, node: usize) -> Operator {
    Operator::elementary(spec.dim(), 0, spec.cavity_index(node), ONE)
}

/// `L = √(2κ) Σ_i a_i`.
pub fn build_collective_lindblad(spec: &NetworkSpec) -> Result<Operator> {
    spec.validate()?;
    let amp = C64::new((2.0 * spec.kappa).sqrt(), 0.0);
    Ok(Operator::from_triplets(
        spec.dim(),
        (0..spec.n_nodes).map(|i| (0, spec.cavity_index(i), amp)),
    ))
}

/// Projector onto the excited atomic level of `node`.
pub fn excited_projector(spec: &NetworkSpec, node: usize) -> Operator {
    let a = spec.atom_index(node);
    Operator::elementary(spec.dim(), a, a, ONE)
}

/// Photon number `a_i†a_i` of cavity `node`.
pub fn cavity_number(spec: &NetworkSpec, node: usize) -> Operator {
    let c = spec.cavity_index(node);
    Operator::elementary(spec.dim(), c, c, ONE)
}

/// `|eg…g⟩`: excitation in the first atom, everything else empty.
pub fn initial_state(spec: &NetworkSpec) -> StateVector {
    StateVector::basis(spec.dim(), spec.atom_index(0))
}

/// The equal-weight W-type dark state `(1/√N) Σ_i |atom_i⟩`.
pub fn target_state(spec: &NetworkSpec) -> Result<StateVector> {
    spec.validate()?;
    let amp = C64::new(1.0 / (spec.n_nodes as f64).sqrt(), 0.0);
    let mut psi = StateVector::zeros(spec.dim());
    for i in 0..spec.n_nodes {
        psi.amplitudes_mut()[spec.atom_index(i)] = amp;
    }
    Ok(psi)
}

/// Bundles the operators that define the open-system dynamics of a chain.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub spec: NetworkSpec,
    pub basis: Basis,
    pub drift: Operator,
    pub controls: Vec<Operator>,
    pub lindblads: Vec<Operator>,
}

impl NetworkModel {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            basis: build_basis(&spec),
            drift: drift_hamiltonian(&spec),
            controls: control_operators(&spec),
            lindblads: vec![build_collective_lindblad(&spec)?],
            spec,
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }
}

/// Piecewise-constant real pulse for one node on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    pub node: usize,
    pub duration: f64,
    /// `values[j]` holds the amplitude on `[t_j, t_{j+1})`.
    pub values: Vec<f64>,
}

impl ControlField {
    pub fn new(node: usize, duration: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("control field has no samples".into()));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "control {node} has a non-finite value at interval {j}"
            )));
        }
        Ok(Self {
            node,
            duration,
            values,
        })
    }

    pub fn zeros(spec: &NetworkSpec, node: usize) -> Self {
        Self {
            node,
            duration: spec.duration,
            values: vec![0.0; spec.n_steps],
        }
    }

    pub fn n_steps(&self) -> usize {
        self.values.len()
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.values.len() as f64
    }

    pub fn midpoints(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.values.len()).map(|j| (j as f64 + 0.5) * dt).collect()
    }
}

/// Blackman window `0.42 − 0.5 cos(2πt/T) + 0.08 cos(4πt/T)`, scaled by `peak`.
pub fn blackman(t: f64, duration: f64, peak: f64) -> f64 {
    let x = t / duration;
    peak * (0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos())
}

/// Blackman guess pulse for one node, sampled at interval midpoints.
pub fn blackman_guess(spec: &NetworkSpec, node: usize, peak: f64) -> Result<ControlField> {
    spec.validate()?;
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "guess peak must be positive, got {peak}"
        )));
    }
    let values = spec
        .midpoints()
        .into_iter()
        .map(|t| blackman(t, spec.duration, peak))
        .collect();
    ControlField::new(node, spec.duration, values)
}

/// The same Blackman guess for every node.
pub fn blackman_guesses(spec: &NetworkSpec, peak: f64) -> Result<Vec<ControlField>> {
    (0..spec.n_nodes)
        .map(|i| blackman_guess(spec, i, peak))
        .collect()
}

/// Update-gating shape `S(t) ∈ [0, 1]`.
///
/// Stored both on the grid points and on the interval midpoints; the
/// optimizer gates interval `j` with `midpoints[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFunction {
    pub grid: Vec<f64>,
    pub midpoints: Vec<f64>,
}

impl ShapeFunction {
    /// Samples `f(t)` on the spec's grid and midpoints. Values are clamped
    /// into `[0, 1]`.
    pub fn from_fn(spec: &NetworkSpec, f: impl Fn(f64) -> f64) -> Self {
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        Self {
            grid: spec.time_grid().into_iter().map(|t| clamp(f(t))).collect(),
            midpoints: spec.midpoints().into_iter().map(|t| clamp(f(t))).collect(),
        }
    }

    pub fn constant(spec: &NetworkSpec, value: f64) -> Self {
        Self::from_fn(spec, |_| value)
    }
}

/// Raised-cosine switch-on and switch-off over `flank_fraction·T` at
/// either end, `1` in between.
pub fn flank_value(t: f64, duration: f64, flank_fraction: f64) -> f64 {
    let flank = flank_fraction * duration;
    let edge = t.min(duration - t);
    if edge <= 0.0 {
        0.0
    } else if edge >= flank {
        1.0
    } else {
        (0.5 * PI * edge / flank).sin().powi(2)
    }
}

pub fn flanked_shape(spec: &NetworkSpec, flank_fraction: f64) -> Result<ShapeFunction> {
    spec.validate()?;
    if !(flank_fraction > 0.0 && flank_fraction <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "flank fraction must lie in (0, 0.5], got {flank_fraction}"
        )));
    }
    let mut shape =
        ShapeFunction::from_fn(spec, |t| flank_value(t, spec.duration, flank_fraction));
    // The last grid point is computed as n_t·dt and may miss T by an ulp.
    shape.grid[0] = 0.0;
    *shape.grid.last_mut().unwrap() = 0.0;
    Ok(shape)
}
