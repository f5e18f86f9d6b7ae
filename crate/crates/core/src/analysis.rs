// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Post-processing of optimized pulses and propagated dynamics.
//!
//! Pulse noise is measured against a Savitzky-Golay smoothed copy of the
//! pulse. Dynamics records hold the node populations and the decay rate
//! `⟨L†L⟩` along a density-matrix history or a single trajectory.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::network::{cavity_number, excited_projector, ControlField, NetworkSpec};
use crate::propagate::Trajectory;
use crate::quantum::{DensityMatrix, Operator, StateVector, ONE};

pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_ORDER: usize = 3;

fn check_filter(window: usize, order: usize) -> Result<()> {
    if window % 2 == 0 || window < 3 {
        return Err(Error::InvalidArgument(format!(
            "Savitzky-Golay window must be odd and at least 3, got {window}"
        )));
    }
    if order >= window {
        return Err(Error::InvalidArgument(format!(
            "Savitzky-Golay order {order} must be below the window {window}"
        )));
    }
    Ok(())
}

/// Filter weights for a `window`-point, `order`-degree least-squares fit.
///
/// Row `p` evaluates the fitted polynomial at offset `p − window/2` from
/// the window centre; the middle row holds the interior convolution weights.
pub fn savgol_coefficients(window: usize, order: usize) -> Result<Vec<Vec<f64>>> {
    check_filter(window, order)?;
    let half = (window / 2) as f64;
    let vander = |x: f64| (0..=order).map(move |k| x.powi(k as i32));
    let a = DMatrix::from_row_iterator(
        window,
        order + 1,
        (0..window).flat_map(|i| vander(i as f64 - half)),
    );
    // (AᵀA)⁻¹Aᵀ maps samples to polynomial coefficients.
    let ata = a.transpose() * &a;
    let fit = ata
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("singular Savitzky-Golay normal equations".into()))?
        .solve(&a.transpose());
    Ok((0..window)
        .map(|p| {
            let row = DVector::from_iterator(order + 1, vander(p as f64 - half));
            (fit.transpose() * row).iter().copied().collect()
        })
        .collect())
}

/// Savitzky-Golay smoothing. The first and last `window/2` points are
/// taken from the polynomial fitted to the first and last full window.
pub fn savgol_smooth(pulse: &ControlField, window: usize, order: usize) -> Result<ControlField> {
    let smoothed = savgol_smooth_values(&pulse.values, window, order)?;
    ControlField::new(pulse.node, pulse.duration, smoothed)
}

pub fn savgol_smooth_values(values: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    let weights = savgol_coefficients(window, order)?;
    let n = values.len();
    if n < window {
        return Err(Error::InvalidArgument(format!(
            "pulse of {n} points is shorter than the filter window {window}"
        )));
    }
    let half = window / 2;
    let apply = |w: &[f64], start: usize| -> f64 {
        w.iter().zip(&values[start..start + window]).map(|(a, b)| a * b).sum()
    };
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let v = if j < half {
            apply(&weights[j], 0)
        } else if j >= n - half {
            apply(&weights[window - (n - j)], n - window)
        } else {
            apply(&weights[half], j - half)
        };
        out.push(v);
    }
    Ok(out)
}

/// `ν = Σ_j |Ω_j − Ω_smooth,j|·dt`.
pub fn noise_measure(pulse: &ControlField, window: usize, order: usize) -> Result<f64> {
    let smooth = savgol_smooth_values(&pulse.values, window, order)?;
    let dt = pulse.dt();
    Ok(pulse
        .values
        .iter()
        .zip(&smooth)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReport {
    /// Noise per control, in pulse amplitude × time.
    pub nu: Vec<f64>,
    pub filter_window: usize,
    pub filter_order: usize,
}

impl NoiseReport {
    pub fn measure(pulses: &[ControlField], window: usize, order: usize) -> Result<Self> {
        let nu = pulses
            .iter()
            .map(|p| noise_measure(p, window, order))
            .collect::<Result<_>>()?;
        Ok(Self {
            nu,
            filter_window: window,
            filter_order: order,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual: f64,
}

/// Least-squares fit of `ln ν = ln c + a·ln M`.
pub fn fit_power_law(ms: &[usize], nus: &[f64]) -> Result<PowerLawFit> {
    check_dim("power-law fit", ms.len(), nus.len())?;
    if ms.len() < 3 {
        return Err(Error::InvalidArgument("power-law fit needs at least 3 points".into()));
    }
    if let Some(m) = ms.iter().find(|&&m| m == 0) {
        return Err(Error::InvalidArgument(format!("trajectory count must be positive, got {m}")));
    }
    if let Some(nu) = nus.iter().find(|nu| !(**nu > 0.0 && nu.is_finite())) {
        return Err(Error::InvalidArgument(format!("noise values must be positive, got {nu}")));
    }
    let xs: Vec<f64> = ms.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = nus.iter().map(|nu| nu.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("power-law fit needs distinct trajectory counts".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        residual,
    })
}

/// Expectation-value time series on the propagation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsRecord {
    pub times: Vec<f64>,
    /// `⟨Π_e⟩` per node, indexed `[node][j]`.
    pub excited: Vec<Vec<f64>>,
    /// `⟨a†a⟩` per node, indexed `[node][j]`.
    pub cavity: Vec<Vec<f64>>,
    /// `⟨L†L⟩` of the collective decay channel.
    pub decay: Vec<f64>,
    pub vacuum: Vec<f64>,
}

struct Observables {
    excited: Vec<Operator>,
    cavity: Vec<Operator>,
    decay: Operator,
}

impl Observables {
    fn new(spec: &NetworkSpec, lindblad: &Operator) -> Result<Self> {
        Ok(Self {
            excited: (0..spec.n_nodes).map(|i| excited_projector(spec, i)).collect(),
            cavity: (0..spec.n_nodes).map(|i| cavity_number(spec, i)).collect(),
            decay: lindblad.adjoint().matmul(lindblad)?,
        })
    }
}

impl DynamicsRecord {
    fn with_capacity(spec: &NetworkSpec, n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            excited: vec![Vec::with_capacity(n); spec.n_nodes],
            cavity: vec![Vec::with_capacity(n); spec.n_nodes],
            decay: Vec::with_capacity(n),
            vacuum: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: f64, ex: impl Fn(&Operator) -> Result<f64>, obs: &Observables) -> Result<()> {
        self.times.push(t);
        for (series, op) in self.excited.iter_mut().zip(&obs.excited) {
            series.push(ex(op)?);
        }
        for (series, op) in self.cavity.iter_mut().zip(&obs.cavity) {
            series.push(ex(op)?);
        }
        self.decay.push(ex(&obs.decay)?);
        Ok(())
    }

    /// Record of a density-matrix history on the grid of `spec`.
    pub fn from_density(history: &[DensityMatrix], spec: &NetworkSpec) -> Result<Self> {
        check_dim("density history length", spec.n_steps + 1, history.len())?;
        let lindblad = crate::network::build_collective_lindblad(spec)?;
        let obs = Observables::new(spec, &lindblad)?;
        let mut rec = Self::with_capacity(spec, history.len());
        for (t, rho) in spec.time_grid().into_iter().zip(history) {
            rec.push(t, |op| rho.expectation(op).map(|z| z.re), &obs)?;
            rec.vacuum.push(rho.entry(0, 0).re);
        }
        Ok(rec)
    }

    /// Record of one trajectory, evaluated on its normalized states.
    pub fn from_trajectory(trajectory: &Trajectory, spec: &NetworkSpec) -> Result<Self> {
        check_dim("trajectory length", spec.n_steps + 1, trajectory.states.len())?;
        let lindblad = crate::network::build_collective_lindblad(spec)?;
        let obs = Observables::new(spec, &lindblad)?;
        let mut rec = Self::with_capacity(spec, trajectory.states.len());
        for (t, psi) in spec.time_grid().into_iter().zip(&trajectory.states) {
            let n = psi.norm_sqr();
            let ex = |op: &Operator| -> Result<f64> {
                if n == 0.0 {
                    return Ok(0.0);
                }
                crate::quantum::expectation(op, psi).map(|z| z.re / n)
            };
            rec.push(t, ex, &obs)?;
            rec.vacuum.push(if n == 0.0 { 0.0 } else { psi.amplitudes()[0].norm_sqr() / n });
        }
        Ok(rec)
    }

    pub fn max_decay(&self) -> f64 {
        self.decay.iter().copied().fold(0.0, f64::max)
    }
}

/// Deviation of cavity `a` from perfect phase opposition to cavity `b`,
/// `|α_a + α_b| / |α_b|`, evaluated as
/// `(⟨(a_a + a_b)†(a_a + a_b)⟩ / ⟨a_b†a_b⟩)^{1/2}`.
///
/// Within one excitation the field expectation `⟨a⟩` itself vanishes, so
/// the relative phase is read off the bright-mode population instead.
pub fn phase_opposition_deviation(rho: &DensityMatrix, spec: &NetworkSpec, a: usize, b: usize) -> Result<f64> {
    let lower = |i| crate::network::cavity_lowering(spec, i);
    let sum = lower(a).add_scaled(&lower(b), ONE)?;
    let bright = sum.adjoint().matmul(&sum)?;
    let nb = rho.expectation(&cavity_number(spec, b))?.re;
    if nb <= 0.0 {
        return Err(Error::InvalidArgument(format!("cavity {b} is empty")));
    }
    Ok((rho.expectation(&bright)?.re.max(0.0) / nb).sqrt())
}

/// Running average of trajectory projectors on the grid.
#[derive(Debug, Clone)]
pub struct EnsembleAverage {
    sums: Vec<DensityMatrix>,
    count: usize,
}

impl EnsembleAverage {
    pub fn new(dim: usize, n_points: usize) -> Self {
        Self {
            sums: vec![DensityMatrix::zeros(dim); n_points],
            count: 0,
        }
    }

    pub fn add(&mut self, trajectory: &Trajectory) -> Result<()> {
        check_dim("trajectory length", self.sums.len(), trajectory.states.len())?;
        for (acc, psi) in self.sums.iter_mut().zip(&trajectory.states) {
            acc.add_projector(psi, 1.0);
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Vec<DensityMatrix> {
        let w = if self.count == 0 { 0.0 } else { 1.0 / self.count as f64 };
        self.sums
            .iter()
            .map(|s| {
                let mut m = s.clone();
                m.scale_mut(w);
                m
            })
            .collect()
    }
}

/// Largest deviation of a state's norm from one over a trajectory.
pub fn max_norm_deviation(states: &[StateVector]) -> f64 {
    states
        .iter()
        .map(|s| (s.norm_sqr() - 1.0).abs())
        .fold(0.0, f64::max)
}
