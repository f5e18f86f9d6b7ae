// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! The `simulate`, `optimize`, `noise-scan` and `validate` subcommands.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use trajkrotov::analysis::{fit_power_law, phase_opposition_deviation, DynamicsRecord, EnsembleAverage, NoiseReport, PowerLawFit};
use trajkrotov::checks::{self, CheckOutcome};
use trajkrotov::krotov::{optimize_with, IterationRecord, Optimization, Optimizer, Variant};
use trajkrotov::network::{blackman_guesses, initial_state, target_state, ControlField, NetworkModel};
use trajkrotov::propagate::{density_propagate, mcwf_propagate, OpenSystem, Trajectory};
use trajkrotov::quantum::DensityMatrix;
use trajkrotov::rng::{Direction, RngStream};

use crate::config::{GuessShape, RunConfig};
use crate::output::{num, opt_num, CsvSink};
use crate::pulse::{load_pulse, node_label, pulse_file_name, save_pulse};

/// Trajectories accumulated per parallel batch in `simulate`.
const BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Density,
    Mcwf,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "density" => Ok(Self::Density),
            "mcwf" => Ok(Self::Mcwf),
            other => Err(format!("unknown method '{other}', expected density or mcwf")),
        }
    }
}

fn prepare_output(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let effective = format!("# config-hash: {}\n{}", cfg.hash(), cfg.effective_toml());
    std::fs::write(dir.join("effective.cfg"), effective)?;
    Ok(dir)
}

/// Initial pulses selected by the `guess` section.
pub fn guess_pulses(cfg: &RunConfig) -> Result<Vec<ControlField>> {
    let spec = cfg.spec();
    Ok(match cfg.guess.shape {
        GuessShape::Blackman => blackman_guesses(&spec, cfg.guess.peak)?,
        GuessShape::Zero => (0..spec.n_nodes).map(|i| ControlField::zeros(&spec, i)).collect(),
    })
}

/// Loads one pulse file per node, in any order.
pub fn load_pulses(cfg: &RunConfig, paths: &[PathBuf]) -> Result<Vec<ControlField>> {
    let spec = cfg.spec();
    if paths.len() != spec.n_nodes {
        bail!("expected {} pulse files, one per node, got {}", spec.n_nodes, paths.len());
    }
    let mut slots: Vec<Option<ControlField>> = vec![None; spec.n_nodes];
    for path in paths {
        let pulse = load_pulse(path, &spec)?;
        let node = pulse.node;
        if slots[node].replace(pulse).is_some() {
            bail!("more than one pulse file for node {}", node_label(node));
        }
    }
    Ok(slots.into_iter().map(|p| p.expect("all nodes present")).collect())
}

pub struct SimulateSummary {
    pub dynamics: DynamicsRecord,
    /// Mean state (density matrix or trajectory average) on the grid.
    pub states: Vec<DensityMatrix>,
    pub n_trajectories: usize,
    pub n_jumps: usize,
    pub files: Vec<PathBuf>,
}

pub fn simulate(cfg: &RunConfig, method: Method, pulse_paths: &[PathBuf]) -> Result<SimulateSummary> {
    let spec = cfg.spec();
    let model = NetworkModel::new(spec.clone())?;
    let system = OpenSystem::from_model(&model)?;
    let controls = if pulse_paths.is_empty() {
        guess_pulses(cfg)?
    } else {
        load_pulses(cfg, pulse_paths)?
    };
    let psi0 = initial_state(&spec);
    let dir = prepare_output(cfg)?;
    let hash = cfg.hash();
    let mut files = Vec::new();

    let (states, n_traj, n_jumps) = match method {
        Method::Density => {
            let history = density_propagate(&system, &DensityMatrix::from_pure(&psi0), &controls, &cfg.density_options())?;
            (history, 0, 0)
        }
        Method::Mcwf => {
            let m = cfg.krotov.n_trajectories.max(1);
            let mut avg = EnsembleAverage::new(spec.dim(), spec.n_steps + 1);
            let mut jumps = CsvSink::create(&dir.join("jumps.csv"), "jumps", &hash, &["trajectory", "time", "operator"])?;
            let mut n_jumps = 0;
            for start in (0..m).step_by(BATCH) {
                let end = (start + BATCH).min(m);
                let batch: Vec<Trajectory> = (start..end)
                    .into_par_iter()
                    .map(|k| {
                        let rng = RngStream::derived(cfg.seed, 0, k as u64, Direction::Forward);
                        mcwf_propagate(&system, &psi0, &controls, rng)
                    })
                    .collect::<trajkrotov::Result<_>>()?;
                for (k, traj) in (start..end).zip(&batch) {
                    avg.add(traj)?;
                    for jump in &traj.jumps {
                        jumps.row([(k + 1).to_string(), num(jump.time), jump.operator.to_string()])?;
                    }
                    n_jumps += traj.jumps.len();
                    if k == 0 {
                        files.push(write_trajectory(&dir.join("trajectory_1.csv"), &hash, &spec.time_grid(), traj)?);
                    }
                }
            }
            files.push(jumps.finish()?);
            (avg.mean(), m, n_jumps)
        }
    };

    let dynamics = DynamicsRecord::from_density(&states, &spec)?;
    files.push(write_dynamics(&dir.join("dynamics.csv"), &hash, &dynamics, &states, cfg)?);
    Ok(SimulateSummary {
        dynamics,
        states,
        n_trajectories: n_traj,
        n_jumps,
        files,
    })
}

fn write_trajectory(path: &Path, hash: &str, times: &[f64], traj: &Trajectory) -> Result<PathBuf> {
    let dim = traj.states[0].dim();
    let mut columns = vec!["t".to_owned()];
    for k in 0..dim {
        columns.push(format!("re_{k}"));
        columns.push(format!("im_{k}"));
    }
    columns.push("jumps".into());
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let comments = [format!("seed: {}", traj.seed)];
    let mut sink = CsvSink::with_comments(path, "trajectory", hash, &comments, &cols)?;
    for (&t, psi) in times.iter().zip(&traj.states) {
        let mut row = vec![num(t)];
        for z in psi.amplitudes() {
            row.push(num(z.re));
            row.push(num(z.im));
        }
        row.push(traj.jumps_until(t).to_string());
        sink.row(row)?;
    }
    sink.finish()
}

fn write_dynamics(
    path: &Path,
    hash: &str,
    rec: &DynamicsRecord,
    states: &[DensityMatrix],
    cfg: &RunConfig,
) -> Result<PathBuf> {
    let spec = cfg.spec();
    let n = spec.n_nodes;
    let mut columns = vec!["t".to_owned()];
    columns.extend((0..n).map(|i| format!("excited_{}", node_label(i))));
    columns.extend((0..n).map(|i| format!("cavity_{}", node_label(i))));
    columns.extend(["decay".to_owned(), "vacuum".to_owned()]);
    if n >= 2 {
        columns.push("phase_deviation_12".into());
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut sink = CsvSink::create(path, "dynamics", hash, &cols)?;
    for (j, &t) in rec.times.iter().enumerate() {
        let mut row = vec![num(t)];
        row.extend(rec.excited.iter().map(|s| num(s[j])));
        row.extend(rec.cavity.iter().map(|s| num(s[j])));
        row.push(num(rec.decay[j]));
        row.push(num(rec.vacuum[j]));
        if n >= 2 {
            row.push(opt_num(phase_opposition_deviation(&states[j], &spec, 0, 1).ok()));
        }
        sink.row(row)?;
    }
    sink.finish()
}

pub struct OptimizeSummary {
    pub optimization: Optimization,
    pub dir: PathBuf,
}

const CONVERGENCE_COLUMNS: [&str; 6] = [
    "iteration",
    "j_t_surrogate",
    "j_t_exact",
    "pulse_update_norm",
    "lambda_scale",
    "n_jumps",
];

fn convergence_row(rec: &IterationRecord) -> [String; 6] {
    [
        rec.iteration.to_string(),
        num(rec.j_t_surrogate),
        opt_num(rec.j_t_exact),
        num(rec.pulse_update_norm),
        num(rec.lambda_scale),
        rec.n_jumps.to_string(),
    ]
}

/// Runs the optimizer, streaming the convergence log. Pulses reached before
/// a failure are written before the error is returned.
pub fn optimize(cfg: &RunConfig) -> Result<OptimizeSummary> {
    let spec = cfg.spec();
    let model = NetworkModel::new(spec.clone())?;
    let system = OpenSystem::from_model(&model)?;
    let psi0 = initial_state(&spec);
    let target = target_state(&spec)?;
    let kcfg = cfg.krotov_config(&model)?;
    let guess = guess_pulses(cfg)?;
    let dir = prepare_output(cfg)?;
    let hash = cfg.hash();
    for pulse in &guess {
        save_pulse(&dir.join(pulse_file_name("guess", pulse.node)), pulse, &hash)?;
    }

    let comments = [format!("variant: {}", kcfg.variant), format!("n_trajectories: {}", kcfg.n_trajectories)];
    let mut convergence =
        CsvSink::with_comments(&dir.join("convergence.csv"), "convergence", &hash, &comments, &CONVERGENCE_COLUMNS)?;
    let mut timing = CsvSink::create(&dir.join("timing.csv"), "timing", &hash, &["iteration", "wall_time"])?;
    if kcfg.n_iterations > 0 {
        let j0 = Optimizer::new(&system, psi0.clone(), target.clone(), guess.clone(), kcfg.clone())?.exact_error()?;
        convergence.row(["0".to_owned(), String::new(), num(j0), String::new(), String::new(), String::new()])?;
    }

    let mut write_error = None;
    let result = optimize_with(&system, &psi0, &target, &guess, &kcfg, |rec, _| {
        if write_error.is_some() {
            return;
        }
        let res = convergence
            .row(convergence_row(rec))
            .and_then(|_| convergence.flush())
            .and_then(|_| timing.row([rec.iteration.to_string(), num(rec.wall_time)]))
            .and_then(|_| timing.flush());
        if let Err(e) = res {
            write_error = Some(e);
        }
    });
    convergence.finish()?;
    timing.finish()?;
    if let Some(e) = write_error {
        return Err(e);
    }
    let (optimization, error) = match result {
        Ok(opt) => (opt, None),
        Err(aborted) => (aborted.partial, Some(aborted.error)),
    };
    for pulse in &optimization.controls {
        save_pulse(&dir.join(pulse_file_name("pulse", pulse.node)), pulse, &hash)?;
    }
    if let Some(error) = error {
        return Err(anyhow::Error::new(error).context(format!(
            "optimization aborted after {} iterations; partial results kept in {}",
            optimization.records.len(),
            dir.display()
        )));
    }
    Ok(OptimizeSummary { optimization, dir })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRun {
    pub m: usize,
    pub seed: u64,
    pub nu: Vec<f64>,
    pub j_t_exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseScanSummary {
    pub variant: Variant,
    pub runs: Vec<NoiseRun>,
    /// Seed-averaged `ν` per trajectory count, `[m_index][node]`.
    pub mean_nu: Vec<Vec<f64>>,
    /// Power-law fit per node.
    pub fits: Vec<PowerLawFit>,
}

/// Optimizes every `(M, seed)` pair with the trajectory variant and fits
/// `ν ∝ M^p` to the seed-averaged noise of each control.
pub fn noise_scan(cfg: &RunConfig) -> Result<NoiseScanSummary> {
    cfg.check_noise_scan()?;
    let spec = cfg.spec();
    let model = NetworkModel::new(spec.clone())?;
    let system = OpenSystem::from_model(&model)?;
    let psi0 = initial_state(&spec);
    let target = target_state(&spec)?;
    let guess = guess_pulses(cfg)?;
    let variant = cfg.noise_variant();
    let noise = &cfg.noise;
    let dir = prepare_output(cfg)?;
    let hash = cfg.hash();

    let jobs: Vec<(usize, u64)> = noise
        .m_list
        .iter()
        .flat_map(|&m| (0..noise.seeds as u64).map(move |s| (m, s)))
        .collect();
    let runs: Vec<NoiseRun> = jobs
        .par_iter()
        .map(|&(m, s)| -> Result<NoiseRun> {
            let mut kcfg = cfg.krotov_config(&model)?;
            kcfg.variant = variant;
            kcfg.n_trajectories = m;
            kcfg.n_iterations = noise.iterations;
            kcfg.eval_exact_every = noise.iterations.max(1);
            kcfg.base_seed = cfg.seed.wrapping_add(s);
            let opt = optimize_with(&system, &psi0, &target, &guess, &kcfg, |_, _| {})
                .with_context(|| format!("noise run M={m} seed offset {s}"))?;
            let report = NoiseReport::measure(&opt.controls, noise.window, noise.order)?;
            Ok(NoiseRun {
                m,
                seed: kcfg.base_seed,
                nu: report.nu,
                j_t_exact: opt.records.last().and_then(|r| r.j_t_exact),
            })
        })
        .collect::<Result<_>>()?;

    let n = spec.n_nodes;
    let mut columns = vec!["m".to_owned(), "seed".to_owned()];
    columns.extend((0..n).map(|i| format!("nu_{}", node_label(i))));
    columns.push("j_t_exact".into());
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let comments = [
        format!("variant: {variant}"),
        format!("iterations: {}", noise.iterations),
        format!("savitzky-golay window {} order {}", noise.window, noise.order),
    ];
    let mut sink = CsvSink::with_comments(&dir.join("noise.csv"), "noise", &hash, &comments, &cols)?;
    for run in &runs {
        let mut row = vec![run.m.to_string(), run.seed.to_string()];
        row.extend(run.nu.iter().map(|&v| num(v)));
        row.push(opt_num(run.j_t_exact));
        sink.row(row)?;
    }
    sink.finish()?;

    let mean_nu: Vec<Vec<f64>> = noise
        .m_list
        .iter()
        .map(|&m| {
            let group: Vec<&NoiseRun> = runs.iter().filter(|r| r.m == m).collect();
            (0..n)
                .map(|i| group.iter().map(|r| r.nu[i]).sum::<f64>() / group.len() as f64)
                .collect()
        })
        .collect();
    let fits = (0..n)
        .map(|i| {
            let nus: Vec<f64> = mean_nu.iter().map(|row| row[i]).collect();
            fit_power_law(&noise.m_list, &nus)
        })
        .collect::<trajkrotov::Result<Vec<_>>>()?;
    let mut sink = CsvSink::with_comments(
        &dir.join("noise_fit.csv"),
        "noise-fit",
        &hash,
        &comments,
        &["node", "exponent", "prefactor", "residual"],
    )?;
    for (i, fit) in fits.iter().enumerate() {
        sink.row([node_label(i).to_string(), num(fit.exponent), num(fit.prefactor), num(fit.residual)])?;
    }
    sink.finish()?;
    Ok(NoiseScanSummary {
        variant,
        runs,
        mean_nu,
        fits,
    })
}

/// Runs the built-in numerical checks.
pub fn validate() -> Vec<CheckOutcome> {
    checks::run_all()
}
