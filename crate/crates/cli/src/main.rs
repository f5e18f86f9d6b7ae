// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use trajkrotov::krotov::Variant;
use trajkrotov_cli::commands::{self, Method};
use trajkrotov_cli::config::{Overrides, RunConfig};

/// Trajectory-based Krotov optimization of cascaded cavity networks.
#[derive(Parser)]
#[command(name = "trajkrotov", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the network under given pulses and write dynamics.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "density")]
        method: Method,
        /// Pulse files, one per node; the configured guess when omitted.
        #[arg(long, num_args = 1..)]
        pulses: Vec<PathBuf>,
    },
    /// Optimize the pulses and write pulse files plus convergence.csv.
    Optimize {
        #[command(flatten)]
        common: Common,
    },
    /// Measure pulse noise against the trajectory count and fit a power law.
    NoiseScan {
        #[command(flatten)]
        common: Common,
        /// Comma-separated trajectory counts.
        #[arg(long, value_delimiter = ',')]
        m_list: Option<Vec<usize>>,
        /// Seeds per trajectory count.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Run the built-in numerical checks.
    Validate,
}

#[derive(Args)]
struct Common {
    /// Config file, or a preset name: two-node, twenty-node.
    #[arg(long, default_value = "two-node")]
    config: PathBuf,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trajectory propagation; all cores when omitted.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self, m_list: Option<Vec<usize>>, seeds: Option<usize>) -> Result<RunConfig> {
        if let Some(n) = self.workers {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("cannot set up the worker pool")?;
        }
        let overrides = Overrides {
            variant: self.variant,
            n_traj: self.n_traj,
            iterations: self.iterations,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            m_list,
            seeds,
        };
        RunConfig::load(&self.config, &overrides).with_context(|| format!("invalid config {}", self.config.display()))
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { common, method, pulses } => {
            let cfg = common.load(None, None)?;
            let summary = commands::simulate(&cfg, method, &pulses)?;
            let last = summary.dynamics.times.len() - 1;
            for (i, series) in summary.dynamics.excited.iter().enumerate() {
                println!("final excited population node {}: {:.6}", i + 1, series[last]);
            }
            println!("max decay rate <L^dag L>: {:.6e}", summary.dynamics.max_decay());
            if method == Method::Mcwf {
                println!("{} trajectories, {} jumps", summary.n_trajectories, summary.n_jumps);
            }
            println!("wrote {}", cfg.output.dir.display());
        }
        Command::Optimize { common } => {
            let cfg = common.load(None, None)?;
            let summary = commands::optimize(&cfg)?;
            let opt = &summary.optimization;
            if let Some(j) = opt.guess_j_t_exact {
                println!("guess j_t_exact: {j:.6e}");
            }
            if let Some(j) = opt.records.iter().rev().find_map(|r| r.j_t_exact) {
                println!("final j_t_exact after {} iterations: {j:.6e}", opt.records.len());
            }
            println!("wrote {}", summary.dir.display());
        }
        Command::NoiseScan { common, m_list, seeds } => {
            let cfg = common.load(m_list, seeds)?;
            let summary = commands::noise_scan(&cfg)?;
            for (i, fit) in summary.fits.iter().enumerate() {
                println!(
                    "node {}: nu ~ {:.4e} * M^{:.4} (log residual {:.3e})",
                    i + 1,
                    fit.prefactor,
                    fit.exponent,
                    fit.residual
                );
            }
            println!("wrote {}", cfg.output.dir.display());
        }
        Command::Validate => {
            let outcomes = commands::validate();
            let mut ok = true;
            for o in &outcomes {
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
                ok &= o.passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
