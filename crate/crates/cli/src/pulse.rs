// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Pulse files: `#` header lines, then one `t_midpoint value` row per
//! interval, written with 17 significant digits so that reading a file back
//! reproduces every value exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use trajkrotov::network::{ControlField, NetworkSpec};

#[derive(Debug, thiserror::Error)]
pub enum PulseError {
    #[error("cannot access pulse file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error(
        "{path}: pulse grid does not match the configuration: expected {expected_rows} intervals \
         of width {expected_dt} on [0, {duration}], found {actual}"
    )]
    GridMismatch {
        path: PathBuf,
        expected_rows: usize,
        expected_dt: f64,
        duration: f64,
        actual: String,
    },
}

/// Node index as written in files and column names (1-based).
pub fn node_label(node: usize) -> usize {
    node + 1
}

pub fn pulse_file_name(prefix: &str, node: usize) -> String {
    format!("{prefix}_{}.dat", node_label(node))
}

pub fn format_pulse(pulse: &ControlField, config_hash: &str) -> String {
    let mut out = String::new();
    writeln!(out, "# trajkrotov pulse").unwrap();
    writeln!(out, "# config-hash: {config_hash}").unwrap();
    writeln!(out, "# node: {}", node_label(pulse.node)).unwrap();
    writeln!(out, "# duration: {:.17e}", pulse.duration).unwrap();
    writeln!(out, "# units: time in hbar/g, amplitude Omega in g").unwrap();
    writeln!(out, "# columns: t_midpoint value").unwrap();
    for (t, v) in pulse.midpoints().iter().zip(&pulse.values) {
        writeln!(out, "{t:.17e} {v:.17e}").unwrap();
    }
    out
}

pub fn save_pulse(path: &Path, pulse: &ControlField, config_hash: &str) -> Result<(), PulseError> {
    std::fs::write(path, format_pulse(pulse, config_hash)).map_err(|source| PulseError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Parses pulse text and checks it against the grid of `spec`.
pub fn parse_pulse(text: &str, path: &Path, spec: &NetworkSpec) -> Result<ControlField, PulseError> {
    let parse_err = |line: usize, reason: String| PulseError::Parse {
        path: path.to_owned(),
        line,
        reason,
    };
    let mut node = None;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(n) = comment.trim().strip_prefix("node:") {
                let n: usize = n
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad node index '{}'", n.trim())))?;
                if n == 0 || n > spec.n_nodes {
                    return Err(parse_err(line, format!("node {n} outside 1..={}", spec.n_nodes)));
                }
                node = Some(n - 1);
            }
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (t, v) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(v), None) => (t, v),
            _ => return Err(parse_err(line, "expected two columns: t_midpoint value".into())),
        };
        let t: f64 = t.parse().map_err(|_| parse_err(line, format!("bad time '{t}'")))?;
        let v: f64 = v.parse().map_err(|_| parse_err(line, format!("bad value '{v}'")))?;
        if !v.is_finite() {
            return Err(parse_err(line, format!("non-finite value {v}")));
        }
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(parse_err(line, format!("time {t} not after {prev}")));
            }
        }
        times.push(t);
        values.push(v);
    }
    let node = node.ok_or_else(|| parse_err(1, "missing '# node:' header".into()))?;

    let mismatch = |actual: String| PulseError::GridMismatch {
        path: path.to_owned(),
        expected_rows: spec.n_steps,
        expected_dt: spec.dt(),
        duration: spec.duration,
        actual,
    };
    if times.len() != spec.n_steps {
        return Err(mismatch(format!("{} rows", times.len())));
    }
    let tol = 1e-9 * spec.duration;
    if let Some((j, (t, m))) = times
        .iter()
        .zip(spec.midpoints())
        .enumerate()
        .find(|(_, (t, m))| (*t - m).abs() > tol)
    {
        return Err(mismatch(format!("row {} at t = {t}, expected midpoint {m}", j + 1)));
    }
    ControlField::new(node, spec.duration, values).map_err(|e| parse_err(1, e.to_string()))
}

pub fn load_pulse(path: &Path, spec: &NetworkSpec) -> Result<ControlField, PulseError> {
    let text = std::fs::read_to_string(path).map_err(|source| PulseError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_pulse(&text, path, spec)
}
