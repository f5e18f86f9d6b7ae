// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Sequential Krotov optimization in three flavours.
//!
//! All variants share one skeleton: propagate co-states backward under the
//! current (guess) pulses and store them on the grid, then propagate the
//! forward states again while updating the pulse interval by interval, so
//! that the update on `[t_j, t_{j+1})` sees the state already driven by the
//! updated pulse up to `t_j`.
//!
//! - [`Variant::Density`]: Liouville-space Krotov with the co-state `P(t)`.
//! - [`Variant::Independent`]: `M` quantum-jump trajectories, each with its
//!   own co-state `χ_k(T) = ⟨Ψ_tgt|Ψ_k(T)⟩·|Ψ_tgt⟩`; only the scalar
//!   per-trajectory increments are combined.
//! - [`Variant::Cross`]: `M` trajectories with co-states `ξ_k(T) = |Ψ_tgt⟩`
//!   and an update built from all pairwise overlaps.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::network::{ControlField, ShapeFunction};
use crate::propagate::{
    backward_mcwf, density_propagate, DensityOptions, DensityStepper, JumpPropagator,
    OpenSystem,
};
use crate::quantum::{inner, DensityMatrix, Operator, StateVector, C64, ZERO};
use crate::rng::{Direction, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Density,
    Independent,
    Cross,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Density => "density",
            Variant::Independent => "independent",
            Variant::Cross => "cross",
        }
    }

    pub fn is_trajectory(self) -> bool {
        !matches!(self, Variant::Density)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "density" => Ok(Variant::Density),
            "independent" => Ok(Variant::Independent),
            "cross" => Ok(Variant::Cross),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant '{other}' (expected density, independent or cross)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Automatic step-size control on `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepControl {
    pub enabled: bool,
    /// Relative pulse change below which `λ` is halved.
    pub stagnation_threshold: f64,
    /// Retries of a density iteration whose error went up, doubling `λ`
    /// each time.
    pub max_rejections: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            enabled: true,
            stagnation_threshold: 1e-6,
            max_rejections: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrotovConfig {
    pub variant: Variant,
    /// Inverse step size per control.
    pub lambda: Vec<f64>,
    /// Update gate per control.
    pub shapes: Vec<ShapeFunction>,
    pub n_iterations: usize,
    /// Trajectories per iteration (ignored by the density variant).
    pub n_trajectories: usize,
    pub base_seed: u64,
    /// Period, in iterations, of exact density-matrix error evaluation for
    /// the trajectory variants. The density variant gets it for free.
    pub eval_exact_every: usize,
    pub density: DensityOptions,
    pub step_control: StepControl,
}

impl KrotovConfig {
    pub fn validate(&self, n_controls: usize) -> Result<()> {
        check_dim("lambda per control", n_controls, self.lambda.len())?;
        check_dim("shape per control", n_controls, self.shapes.len())?;
        if let Some(l) = self.lambda.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {l}")));
        }
        if self.variant.is_trajectory() && self.n_trajectories == 0 {
            return Err(Error::InvalidArgument("n_trajectories must be at least 1".into()));
        }
        if self.variant == Variant::Cross && self.n_trajectories < 2 {
            return Err(Error::InvalidArgument(
                "the cross-trajectory variant needs at least 2 trajectories".into(),
            ));
        }
        if self.eval_exact_every == 0 {
            return Err(Error::InvalidArgument("eval_exact_every must be positive".into()));
        }
        Ok(())
    }
}

/// Default dimensionless inverse step size.
pub const DEFAULT_LAMBDA: f64 = 100.0;

/// Converts a dimensionless `λ` into the weight used in the update for a
/// control with derivative operator `μ`: `λ·‖μ‖₁²`.
///
/// The change of the Hamiltonian induced by an update scales with `‖μ‖²/λ`,
/// so the dimensionless value is independent of how the control is
/// normalized.
pub fn scaled_lambda(dimensionless: f64, mu: &Operator) -> f64 {
    let norm = mu.one_norm();
    dimensionless * norm * norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// The functional guiding the variant, for the updated pulses.
    pub j_t_surrogate: f64,
    /// `1 − ⟨⟨ρ(T)|P_tgt⟩⟩` from exact density propagation, when evaluated.
    pub j_t_exact: Option<f64>,
    /// `‖Δu‖₂ = (Σ_i Σ_j Δu_ij² dt)^{1/2}`.
    pub pulse_update_norm: f64,
    pub wall_time: f64,
    /// Scale applied to the configured `λ` by step control.
    pub lambda_scale: f64,
    /// Forward-pass jumps summed over trajectories.
    pub n_jumps: usize,
}

/// `J_T = 1 − ⟨⟨ρ(T)|P_tgt⟩⟩ = 1 − ⟨Ψ_tgt|ρ(T)|Ψ_tgt⟩`.
pub fn functional_density(rho_t: &DensityMatrix, target: &StateVector) -> Result<f64> {
    check_dim("density functional", rho_t.dim(), target.dim())?;
    let d = rho_t.dim();
    let t = target.amplitudes();
    let mut acc = ZERO;
    for r in 0..d {
        for c in 0..d {
            acc += t[r].conj() * rho_t.entry(r, c) * t[c];
        }
    }
    Ok(1.0 - acc.re)
}

/// `J_T = 1 − (1/M) Σ_k |⟨Ψ_k(T)|Ψ_tgt⟩|²` over normalized final states. A
/// zero final state contributes an infidelity of one.
pub fn functional_trajectories(finals: &[StateVector], target: &StateVector) -> Result<f64> {
    if finals.is_empty() {
        return Err(Error::InvalidArgument("no trajectories".into()));
    }
    let mut fid = 0.0;
    for psi in finals {
        check_dim("trajectory functional", target.dim(), psi.dim())?;
        let n = psi.norm_sqr();
        if n > 0.0 {
            fid += psi.inner(target).norm_sqr() / n;
        }
    }
    Ok(1.0 - fid / finals.len() as f64)
}

#[inline]
fn im_matrix_element(bra: &[C64], op: &Operator, ket: &[C64]) -> C64 {
    let mut acc = ZERO;
    for (r, c, v) in op.iter() {
        acc += bra[r].conj() * v * ket[c];
    }
    acc
}

/// One trajectory's contribution `(S/(Mλ))·Im⟨χ|μ|Ψ⟩`.
pub fn update_increment_traj(
    chi: &StateVector,
    psi: &StateVector,
    mu: &Operator,
    shape: f64,
    lambda: f64,
    m: usize,
) -> f64 {
    if shape == 0.0 {
        return 0.0;
    }
    let z = im_matrix_element(chi.amplitudes(), mu, psi.amplitudes());
    shape / (m as f64 * lambda) * z.im
}

/// `(S/(M²λ)) Σ_{k,k'} Im[⟨ξ_k|μ|Ψ_k'⟩⟨Ψ_k'|ξ_k⟩]` by the explicit double sum.
pub fn update_increment_cross(
    xis: &[StateVector],
    psis: &[StateVector],
    mu: &Operator,
    shape: f64,
    lambda: f64,
) -> f64 {
    assert_eq!(xis.len(), psis.len(), "cross update needs matching trajectory counts");
    if shape == 0.0 {
        return 0.0;
    }
    let m = psis.len() as f64;
    let mut buf = vec![ZERO; mu.dim()];
    let mut acc = 0.0;
    for psi in psis {
        mu.apply_into(psi.amplitudes(), &mut buf);
        for xi in xis {
            let a = inner(xi.amplitudes(), &buf);
            let b = inner(psi.amplitudes(), xi.amplitudes());
            acc += (a * b).im;
        }
    }
    shape / (m * m * lambda) * acc
}

/// The cross update in trace form, `(S/λ)·Im tr[P̃ μ ρ̃]` with
/// `P̃ = (1/M)Σ|ξ_k⟩⟨ξ_k|` and `ρ̃ = (1/M)Σ|Ψ_k⟩⟨Ψ_k|`.
pub fn update_increment_cross_trace(
    xis: &[StateVector],
    psis: &[StateVector],
    mu: &Operator,
    shape: f64,
    lambda: f64,
) -> f64 {
    assert_eq!(xis.len(), psis.len(), "cross update needs matching trajectory counts");
    if shape == 0.0 {
        return 0.0;
    }
    let d = mu.dim();
    let w = 1.0 / psis.len() as f64;
    let mut p = DensityMatrix::zeros(d);
    let mut rho = DensityMatrix::zeros(d);
    for (xi, psi) in xis.iter().zip(psis) {
        p.add_projector(xi, w);
        rho.add_projector(psi, w);
    }
    shape / lambda * trace_p_mu_rho(&p, mu, &rho).im
}

/// `tr[P μ ρ] = Σ_{(r,c)∈μ} μ_rc (ρP)_cr`.
fn trace_p_mu_rho(p: &DensityMatrix, mu: &Operator, rho: &DensityMatrix) -> C64 {
    let d = p.dim();
    let (pd, rd) = (p.data(), rho.data());
    let mut acc = ZERO;
    for (r, c, v) in mu.iter() {
        let mut rp = ZERO;
        for x in 0..d {
            rp += rd[c * d + x] * pd[x * d + r];
        }
        acc += v * rp;
    }
    acc
}

/// Liouville-space increment `(S/(2λ))·Im tr[P†[μ, ρ]]`.
///
/// The factor ½ puts all three variants on the same `λ` scale: for a pure
/// `ρ` and `P` this equals the single-trajectory increment.
pub fn update_increment_density(
    p: &DensityMatrix,
    rho: &DensityMatrix,
    mu: &Operator,
    shape: f64,
    lambda: f64,
) -> f64 {
    if shape == 0.0 {
        return 0.0;
    }
    let d = p.dim();
    let (pd, rd) = (p.data(), rho.data());
    // tr[P†μρ] − tr[P†ρμ]
    let mut acc = ZERO;
    for (r, c, v) in mu.iter() {
        let mut rho_pdag = ZERO;
        let mut pdag_rho = ZERO;
        for x in 0..d {
            rho_pdag += rd[c * d + x] * pd[r * d + x].conj();
            pdag_rho += pd[x * d + c].conj() * rd[x * d + r];
        }
        acc += v * (rho_pdag - pdag_rho);
    }
    shape / (2.0 * lambda) * acc.im
}

/// Result of a (possibly partial) optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimization {
    pub controls: Vec<ControlField>,
    pub records: Vec<IterationRecord>,
    /// Exact error of the guess, when any iteration ran.
    pub guess_j_t_exact: Option<f64>,
}

/// An optimization stopped by a numerical failure; `partial` holds every
/// iteration completed before it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("optimization aborted after {} iterations: {error}", partial.records.len())]
pub struct Aborted {
    pub partial: Optimization,
    pub error: Error,
}

enum Cache {
    Density { j_t: f64 },
    Trajectories { finals: Vec<StateVector> },
}

/// Stateful optimizer holding the current pulses between iterations.
pub struct Optimizer<'a> {
    system: &'a OpenSystem,
    psi0: StateVector,
    target: StateVector,
    config: KrotovConfig,
    controls: Vec<ControlField>,
    lambda_scale: f64,
    iteration: usize,
    cache: Option<Cache>,
}

impl<'a> Optimizer<'a> {
    pub fn new(
        system: &'a OpenSystem,
        psi0: StateVector,
        target: StateVector,
        guess: Vec<ControlField>,
        config: KrotovConfig,
    ) -> Result<Self> {
        config.validate(system.n_controls())?;
        check_dim("initial state", system.dim(), psi0.dim())?;
        check_dim("target state", system.dim(), target.dim())?;
        crate::propagate::check_controls(system, &guess)?;
        for shape in &config.shapes {
            check_dim("shape function grid", guess[0].n_steps(), shape.midpoints.len())?;
        }
        Ok(Self {
            system,
            psi0,
            target,
            config,
            controls: guess,
            lambda_scale: 1.0,
            iteration: 0,
            cache: None,
        })
    }

    pub fn controls(&self) -> &[ControlField] {
        &self.controls
    }

    pub fn into_controls(self) -> Vec<ControlField> {
        self.controls
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn config(&self) -> &KrotovConfig {
        &self.config
    }

    /// `J_T` of the current pulses from exact density propagation.
    pub fn exact_error(&self) -> Result<f64> {
        let hist = density_propagate(
            self.system,
            &self.psi0.projector(),
            &self.controls,
            &self.config.density,
        )?;
        functional_density(hist.last().unwrap(), &self.target)
    }

    /// Runs one Krotov iteration and returns its record.
    pub fn iterate(&mut self) -> Result<IterationRecord> {
        let start = Instant::now();
        let iteration = self.iteration + 1;
        let mut record = match self.config.variant {
            Variant::Density => self.iterate_density(iteration)?,
            Variant::Independent | Variant::Cross => self.iterate_trajectories(iteration)?,
        };
        self.iteration = iteration;
        record.wall_time = start.elapsed().as_secs_f64();
        Ok(record)
    }

    fn lambda(&self, i: usize) -> f64 {
        self.config.lambda[i] * self.lambda_scale
    }

    fn n_steps(&self) -> usize {
        self.controls[0].n_steps()
    }

    fn dt(&self) -> f64 {
        self.controls[0].dt()
    }

    fn update_norm(&self, old: &[ControlField]) -> (f64, f64) {
        let dt = self.dt();
        let mut du2 = 0.0;
        let mut u2 = 0.0;
        for (new, old) in self.controls.iter().zip(old) {
            for (a, b) in new.values.iter().zip(&old.values) {
                du2 += (a - b).powi(2) * dt;
                u2 += b * b * dt;
            }
        }
        (du2.sqrt(), if u2 > 0.0 { (du2 / u2).sqrt() } else { du2.sqrt() })
    }

    fn adapt_on_stagnation(&mut self, relative_change: f64) {
        let sc = &self.config.step_control;
        if sc.enabled && relative_change > 0.0 && relative_change < sc.stagnation_threshold {
            self.lambda_scale *= 0.5;
        }
    }

    fn iterate_density(&mut self, iteration: usize) -> Result<IterationRecord> {
        let rho0 = self.psi0.projector();
        let j_old = match self.cache {
            Some(Cache::Density { j_t }) => j_t,
            _ => self.exact_error()?,
        };
        let p_target = self.target.projector();
        let costates = crate::propagate::backward_density_propagate(
            self.system,
            &p_target,
            &self.controls,
            &self.config.density,
        )?;
        let guess = self.controls.clone();
        let mut rejections = 0;
        loop {
            let rho_t = self.sequential_density_pass(&rho0, &costates, &guess)?;
            let j_new = functional_density(&rho_t, &self.target)?;
            let sc = &self.config.step_control;
            if sc.enabled && j_new > j_old + 1e-10 && rejections < sc.max_rejections {
                rejections += 1;
                self.lambda_scale *= 2.0;
                self.controls = guess.clone();
                continue;
            }
            let (norm, rel) = self.update_norm(&guess);
            self.adapt_on_stagnation(rel);
            self.cache = Some(Cache::Density { j_t: j_new });
            return Ok(IterationRecord {
                iteration,
                j_t_surrogate: j_new,
                j_t_exact: Some(j_new),
                pulse_update_norm: norm,
                wall_time: 0.0,
                lambda_scale: self.lambda_scale,
                n_jumps: 0,
            });
        }
    }

    fn sequential_density_pass(
        &mut self,
        rho0: &DensityMatrix,
        costates: &[DensityMatrix],
        guess: &[ControlField],
    ) -> Result<DensityMatrix> {
        let n = self.n_steps();
        let dt = self.dt();
        let n_c = self.controls.len();
        let lambdas: Vec<f64> = (0..n_c).map(|i| self.lambda(i)).collect();
        let mut stepper = DensityStepper::new(self.system, self.config.density.substeps);
        let mut rho = rho0.clone();
        let mut values = vec![0.0; n_c];
        for j in 0..n {
            for i in 0..n_c {
                let du = update_increment_density(
                    &costates[j],
                    &rho,
                    &self.system.controls()[i],
                    self.config.shapes[i].midpoints[j],
                    lambdas[i],
                );
                if !du.is_finite() {
                    return Err(Error::NonFiniteUpdate { control: i, interval: j });
                }
                values[i] = guess[i].values[j] + du;
                self.controls[i].values[j] = values[i];
            }
            stepper.step_forward(&mut rho, &values, dt);
        }
        let drift = (rho.trace() - rho0.trace()).norm();
        if !(drift <= self.config.density.trace_tolerance) {
            return Err(Error::TraceDrift { step: n, drift });
        }
        Ok(rho)
    }

    fn forward_trajectories(&self, iteration: usize) -> Result<Vec<StateVector>> {
        (0..self.config.n_trajectories)
            .into_par_iter()
            .map(|k| {
                let rng = RngStream::derived(self.config.base_seed, iteration as u64, k as u64, Direction::Forward);
                crate::propagate::mcwf_propagate(self.system, &self.psi0, &self.controls, rng)
                    .map(|t| t.final_state().clone())
            })
            .collect()
    }

    fn iterate_trajectories(&mut self, iteration: usize) -> Result<IterationRecord> {
        let finals = match self.cache.take() {
            Some(Cache::Trajectories { finals }) => finals,
            _ => self.forward_trajectories(0)?,
        };
        let m = self.config.n_trajectories;
        let variant = self.config.variant;
        let boundaries: Vec<StateVector> = finals
            .iter()
            .map(|psi| match variant {
                // −∂J_T/∂⟨Ψ_k| = |Ψ_tgt⟩⟨Ψ_tgt|Ψ_k(T)⟩
                Variant::Independent => self.target.scaled(self.target.inner(psi)),
                _ => self.target.clone(),
            })
            .collect();

        let costates: Vec<Vec<StateVector>> = boundaries
            .par_iter()
            .enumerate()
            .map(|(k, chi_t)| {
                let rng = RngStream::derived(
                    self.config.base_seed,
                    iteration as u64,
                    k as u64,
                    Direction::Backward,
                );
                backward_mcwf(self.system, chi_t, &self.controls, rng).map(|t| t.states)
            })
            .collect::<Result<_>>()?;

        let guess = self.controls.clone();
        let n = self.n_steps();
        let dt = self.dt();
        let n_c = self.controls.len();
        let lambdas: Vec<f64> = (0..n_c).map(|i| self.lambda(i)).collect();
        let mut props: Vec<JumpPropagator<'_>> = (0..m)
            .map(|k| {
                let rng = RngStream::derived(self.config.base_seed, iteration as u64, k as u64, Direction::Forward);
                JumpPropagator::new(self.system, Direction::Forward, &self.psi0, rng)
            })
            .collect::<Result<_>>()?;
        let parallel = m >= 4 && self.system.dim() >= 16 && rayon::current_num_threads() > 1;
        let mut psis: Vec<StateVector> = vec![StateVector::zeros(self.system.dim()); m];
        let mut xis: Vec<StateVector> = vec![StateVector::zeros(self.system.dim()); m];
        let mut values = vec![0.0; n_c];
        for j in 0..n {
            for (psi, prop) in psis.iter_mut().zip(&props) {
                prop.state_into(psi.amplitudes_mut());
            }
            for (xi, hist) in xis.iter_mut().zip(&costates) {
                xi.amplitudes_mut().copy_from_slice(hist[j].amplitudes());
            }
            for i in 0..n_c {
                let mu = &self.system.controls()[i];
                let s = self.config.shapes[i].midpoints[j];
                let du = match variant {
                    Variant::Independent => xis
                        .iter()
                        .zip(&psis)
                        .map(|(chi, psi)| update_increment_traj(chi, psi, mu, s, lambdas[i], m))
                        .sum::<f64>(),
                    _ if m > self.system.dim() => {
                        update_increment_cross_trace(&xis, &psis, mu, s, lambdas[i])
                    }
                    _ => update_increment_cross(&xis, &psis, mu, s, lambdas[i]),
                };
                if !du.is_finite() {
                    return Err(Error::NonFiniteUpdate { control: i, interval: j });
                }
                values[i] = guess[i].values[j] + du;
                self.controls[i].values[j] = values[i];
            }
            let t0 = j as f64 * dt;
            if parallel {
                props
                    .par_iter_mut()
                    .try_for_each(|p| p.advance(&values, t0, dt, j))?;
            } else {
                for p in props.iter_mut() {
                    p.advance(&values, t0, dt, j)?;
                }
            }
        }
        let n_jumps = props.iter().map(|p| p.jumps().len()).sum();
        let finals: Vec<StateVector> = props.iter().map(JumpPropagator::state).collect();
        let j_surrogate = functional_trajectories(&finals, &self.target)?;
        self.cache = Some(Cache::Trajectories { finals });

        let (norm, rel) = self.update_norm(&guess);
        self.adapt_on_stagnation(rel);
        let j_t_exact = if iteration % self.config.eval_exact_every == 0
            || iteration == self.config.n_iterations
        {
            Some(self.exact_error()?)
        } else {
            None
        };
        Ok(IterationRecord {
            iteration,
            j_t_surrogate: j_surrogate,
            j_t_exact,
            pulse_update_norm: norm,
            wall_time: 0.0,
            lambda_scale: self.lambda_scale,
            n_jumps,
        })
    }
}

/// Runs `config.n_iterations` iterations from `guess`.
pub fn optimize(
    system: &OpenSystem,
    psi0: &StateVector,
    target: &StateVector,
    guess: &[ControlField],
    config: &KrotovConfig,
) -> std::result::Result<Optimization, Aborted> {
    optimize_with(system, psi0, target, guess, config, |_, _| {})
}

/// As [`optimize`], calling `on_iteration` after every completed iteration.
pub fn optimize_with(
    system: &OpenSystem,
    psi0: &StateVector,
    target: &StateVector,
    guess: &[ControlField],
    config: &KrotovConfig,
    mut on_iteration: impl FnMut(&IterationRecord, &[ControlField]),
) -> std::result::Result<Optimization, Aborted> {
    let mut result = Optimization {
        controls: guess.to_vec(),
        records: Vec::new(),
        guess_j_t_exact: None,
    };
    let abort = |partial: Optimization, error: Error| Aborted { partial, error };
    let mut opt = match Optimizer::new(system, psi0.clone(), target.clone(), guess.to_vec(), config.clone()) {
        Ok(opt) => opt,
        Err(e) => return Err(abort(result, e)),
    };
    if config.n_iterations == 0 {
        return Ok(result);
    }
    match opt.exact_error() {
        Ok(j) => result.guess_j_t_exact = Some(j),
        Err(e) => return Err(abort(result, e)),
    }
    for _ in 0..config.n_iterations {
        match opt.iterate() {
            Ok(record) => {
                on_iteration(&record, opt.controls());
                result.records.push(record);
                result.controls = opt.controls().to_vec();
            }
            Err(e) => return Err(abort(result, e)),
        }
    }
    Ok(result)
}
