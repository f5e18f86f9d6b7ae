// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::Command;

use trajkrotov_cli::commands::{self, Method};
use trajkrotov_cli::config::{Overrides, RunConfig};
use trajkrotov_cli::output::read_rows;
use trajkrotov_cli::pulse::{load_pulse, save_pulse};

const SMALL: &str = r#"
seed = 7

[network]
n_nodes = 2
g = 1.0
delta = 100.0
kappa = 1.0
duration = 5.0
n_steps = 200

[guess]
shape = "blackman"
peak = 200.0

[krotov]
variant = "independent"
n_trajectories = 2
iterations = 3
eval_exact_every = 1
"#;

fn small(dir: &Path, extra: Overrides) -> RunConfig {
    let ov = Overrides { output_dir: Some(dir.to_owned()), ..extra };
    RunConfig::from_toml(SMALL, &ov).unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn zero_iterations_write_the_guess_back_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), Overrides { iterations: Some(0), ..Overrides::default() });
    commands::optimize(&cfg).unwrap();
    for node in 1..=2 {
        let guess = read(&dir.path().join(format!("guess_{node}.dat")));
        let pulse = read(&dir.path().join(format!("pulse_{node}.dat")));
        assert_eq!(guess, pulse);
    }
}

#[test]
fn identical_configs_give_identical_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ca = small(a.path(), Overrides::default());
    let cb = small(b.path(), Overrides::default());
    assert_eq!(ca.hash(), cb.hash());
    commands::optimize(&ca).unwrap();
    commands::optimize(&cb).unwrap();
    for f in ["convergence.csv", "pulse_1.dat", "pulse_2.dat", "guess_1.dat"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    for m in [Method::Density, Method::Mcwf] {
        commands::simulate(&ca, m, &[]).unwrap();
        commands::simulate(&cb, m, &[]).unwrap();
        assert_eq!(read(&a.path().join("dynamics.csv")), read(&b.path().join("dynamics.csv")));
    }
    assert_eq!(read(&a.path().join("jumps.csv")), read(&b.path().join("jumps.csv")));
    assert_eq!(read(&a.path().join("trajectory_1.csv")), read(&b.path().join("trajectory_1.csv")));
}

#[test]
fn every_csv_names_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), Overrides::default());
    commands::optimize(&cfg).unwrap();
    commands::simulate(&cfg, Method::Mcwf, &[]).unwrap();
    let line = format!("# config-hash: {}", cfg.hash());
    let mut seen = 0;
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let text = String::from_utf8(read(&path)).unwrap();
            assert!(text.lines().take(2).any(|l| l == line), "{}", path.display());
            seen += 1;
        }
    }
    assert_eq!(seen, 5);
}

#[test]
fn convergence_log_matches_returned_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), Overrides::default());
    let summary = commands::optimize(&cfg).unwrap();
    let (header, rows) = read_rows(&dir.path().join("convergence.csv")).unwrap();
    assert_eq!(header[..3], ["iteration", "j_t_surrogate", "j_t_exact"]);
    assert_eq!(rows.len(), 4);
    let j0: f64 = rows[0][2].parse().unwrap();
    assert_eq!(Some(j0), summary.optimization.guess_j_t_exact);
    for (row, rec) in rows[1..].iter().zip(&summary.optimization.records) {
        assert_eq!(row[0].parse::<usize>().unwrap(), rec.iteration);
        assert_eq!(row[2].parse::<f64>().ok(), rec.j_t_exact);
    }
    let (_, timing) = read_rows(&dir.path().join("timing.csv")).unwrap();
    assert_eq!(timing.len(), 3);
}

#[test]
fn optimized_pulses_round_trip_and_feed_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), Overrides::default());
    let summary = commands::optimize(&cfg).unwrap();
    let spec = cfg.spec();
    let paths: Vec<_> = [2, 1].iter().map(|n| dir.path().join(format!("pulse_{n}.dat"))).collect();
    for (path, pulse) in paths.iter().rev().zip(&summary.optimization.controls) {
        assert_eq!(&load_pulse(path, &spec).unwrap(), pulse);
    }
    let sim = commands::simulate(&cfg, Method::Density, &paths).unwrap();
    let direct = commands::simulate(&cfg, Method::Density, &[]).unwrap();
    assert_ne!(sim.dynamics, direct.dynamics);
}

#[test]
fn pulse_files_on_another_grid_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), Overrides::default());
    let coarse = RunConfig::from_toml(&SMALL.replace("n_steps = 200", "n_steps = 150"), &Overrides::default()).unwrap();
    let guess = commands::guess_pulses(&coarse).unwrap();
    let paths: Vec<_> = guess
        .iter()
        .map(|p| {
            let path = dir.path().join(format!("coarse_{}.dat", p.node));
            save_pulse(&path, p, "x").unwrap();
            path
        })
        .collect();
    let err = commands::simulate(&cfg, Method::Density, &paths).err().unwrap();
    let msg = format!("{err:#}");
    assert!(msg.contains("expected 200 intervals") && msg.contains("150 rows"), "{msg}");
}

#[test]
fn zero_pulses_keep_the_first_atom_excited() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("shape = \"blackman\"", "shape = \"zero\"");
    let ov = Overrides { output_dir: Some(dir.path().to_owned()), n_traj: Some(50), ..Overrides::default() };
    let cfg = RunConfig::from_toml(&text, &ov).unwrap();
    for method in [Method::Density, Method::Mcwf] {
        let sim = commands::simulate(&cfg, method, &[]).unwrap();
        for &p in &sim.dynamics.excited[0] {
            assert!((p - 1.0).abs() <= 1e-12, "{method:?}: {p}");
        }
        assert_eq!(sim.n_jumps, 0);
    }
}

#[test]
fn noise_scan_writes_one_row_per_run_and_a_fit_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let ov = Overrides {
        output_dir: Some(dir.path().to_owned()),
        m_list: Some(vec![1, 2, 4]),
        seeds: Some(2),
        ..Overrides::default()
    };
    let text = format!("{SMALL}\n[noise]\niterations = 2\n");
    let cfg = RunConfig::from_toml(&text, &ov).unwrap();
    let summary = commands::noise_scan(&cfg).unwrap();
    assert_eq!(summary.runs.len(), 6);
    assert_eq!(summary.fits.len(), 2);
    let (_, rows) = read_rows(&dir.path().join("noise.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    let (_, fits) = read_rows(&dir.path().join("noise_fit.csv")).unwrap();
    assert_eq!(fits.len(), 2);
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trajkrotov"))
}

#[test]
fn validate_command_passes() {
    let out = binary().arg("validate").output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 9);
}

#[test]
fn missing_config_field_is_named_by_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, SMALL.replace("kappa = 1.0\n", "")).unwrap();
    let out = binary()
        .args(["optimize", "--config"])
        .arg(&path)
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("network.kappa"), "{stderr}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.cfg");
    std::fs::write(&path, SMALL).unwrap();
    let out_dir = dir.path().join("out");
    let out = binary()
        .args(["optimize", "--variant", "cross", "--n-traj", "3", "--iterations", "1", "--seed", "9", "--workers", "1"])
        .arg("--config")
        .arg(&path)
        .arg("--output-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let effective = std::fs::read_to_string(out_dir.join("effective.cfg")).unwrap();
    for needle in ["variant = \"cross\"", "n_trajectories = 3", "iterations = 1", "seed = 9"] {
        assert!(effective.contains(needle), "{needle} missing from\n{effective}");
    }
}
