// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration: TOML files with dotted sections, command-line
//! overrides, and the resolved ("effective") configuration with its hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use trajkrotov::krotov::{
    scaled_lambda, KrotovConfig, StepControl, Variant, DEFAULT_LAMBDA,
};
use trajkrotov::network::{flanked_shape, NetworkModel, NetworkSpec};
use trajkrotov::propagate::DensityOptions;

/// Environment variable naming the fallback output directory.
pub const OUTPUT_DIR_ENV: &str = "TRAJKROTOV_OUTPUT_DIR";
const FALLBACK_OUTPUT_DIR: &str = "trajkrotov-out";

pub const TWO_NODE_PRESET: &str = include_str!("../presets/two-node.cfg");
pub const TWENTY_NODE_PRESET: &str = include_str!("../presets/twenty-node.cfg");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    network: Option<RawNetwork>,
    guess: Option<RawGuess>,
    krotov: Option<RawKrotov>,
    noise: Option<RawNoise>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    n_nodes: Option<usize>,
    g: Option<f64>,
    delta: Option<f64>,
    kappa: Option<f64>,
    duration: Option<f64>,
    n_steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGuess {
    shape: Option<String>,
    peak: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKrotov {
    variant: Option<String>,
    lambda: Option<f64>,
    flank_fraction: Option<f64>,
    iterations: Option<usize>,
    n_trajectories: Option<usize>,
    eval_exact_every: Option<usize>,
    step_control: Option<bool>,
    substeps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    variant: Option<String>,
    iterations: Option<usize>,
    m_list: Option<Vec<usize>>,
    seeds: Option<usize>,
    window: Option<usize>,
    order: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GuessShape {
    Blackman,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSection {
    pub n_nodes: usize,
    pub g: f64,
    pub delta: f64,
    pub kappa: f64,
    pub duration: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuessSection {
    pub shape: GuessShape,
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KrotovSection {
    pub variant: String,
    /// Dimensionless inverse step size, see [`scaled_lambda`].
    pub lambda: f64,
    pub flank_fraction: f64,
    pub iterations: usize,
    pub n_trajectories: usize,
    pub eval_exact_every: usize,
    pub step_control: bool,
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSection {
    pub variant: String,
    pub iterations: usize,
    pub m_list: Vec<usize>,
    pub seeds: usize,
    pub window: usize,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// Fully resolved configuration; every default is explicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub network: NetworkSection,
    pub guess: GuessSection,
    pub krotov: KrotovSection,
    pub noise: NoiseSection,
    pub output: OutputSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub variant: Option<Variant>,
    pub n_traj: Option<usize>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub m_list: Option<Vec<usize>>,
    pub seeds: Option<usize>,
}

fn require<T>(value: Option<T>, field: &'static str) -> Result<T> {
    value.ok_or(ConfigError::Missing(field))
}

fn positive(value: f64, field: &'static str) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(field, format!("must be positive and finite, got {value}")))
    }
}

fn parse_variant(s: &str, field: &'static str) -> Result<Variant> {
    s.parse().map_err(|e: trajkrotov::Error| invalid(field, e.to_string()))
}

impl RunConfig {
    /// Parses config text and applies `overrides`.
    pub fn from_toml(text: &str, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        Self::resolve(raw, overrides)
    }

    /// Loads a config file, or one of the built-in presets `two-node` and
    /// `twenty-node` when `path` names no existing file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = match path.to_str() {
            Some("two-node") if !path.exists() => TWO_NODE_PRESET.to_owned(),
            Some("twenty-node") if !path.exists() => TWENTY_NODE_PRESET.to_owned(),
            _ => std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_owned(),
                source,
            })?,
        };
        Self::from_toml(&text, overrides)
    }

    fn resolve(raw: RawConfig, ov: &Overrides) -> Result<Self> {
        let net = raw.network.ok_or(ConfigError::Missing("network"))?;
        let network = NetworkSection {
            n_nodes: require(net.n_nodes, "network.n_nodes")?,
            g: positive(require(net.g, "network.g")?, "network.g")?,
            delta: positive(require(net.delta, "network.delta")?, "network.delta")?,
            kappa: positive(require(net.kappa, "network.kappa")?, "network.kappa")?,
            duration: positive(require(net.duration, "network.duration")?, "network.duration")?,
            n_steps: require(net.n_steps, "network.n_steps")?,
        };
        if network.n_nodes == 0 {
            return Err(invalid("network.n_nodes", "must be at least 1"));
        }
        if network.n_steps < 2 {
            return Err(invalid("network.n_steps", "must be at least 2"));
        }

        let g = raw.guess.unwrap_or_default();
        let shape = match g.shape.as_deref().unwrap_or("blackman") {
            "blackman" => GuessShape::Blackman,
            "zero" => GuessShape::Zero,
            other => return Err(invalid("guess.shape", format!("expected blackman or zero, got '{other}'"))),
        };
        let guess = GuessSection {
            shape,
            peak: positive(g.peak.unwrap_or(200.0), "guess.peak")?,
        };

        let k = raw.krotov.unwrap_or_default();
        let variant = match ov.variant {
            Some(v) => v,
            None => parse_variant(k.variant.as_deref().unwrap_or("density"), "krotov.variant")?,
        };
        let n_trajectories = ov.n_traj.or(k.n_trajectories).unwrap_or(match variant {
            Variant::Cross => 2,
            _ => 1,
        });
        let flank_fraction = k.flank_fraction.unwrap_or(0.1);
        if !(flank_fraction > 0.0 && flank_fraction <= 0.5) {
            return Err(invalid("krotov.flank_fraction", format!("must lie in (0, 0.5], got {flank_fraction}")));
        }
        let krotov = KrotovSection {
            variant: variant.name().to_owned(),
            lambda: positive(k.lambda.unwrap_or(DEFAULT_LAMBDA), "krotov.lambda")?,
            flank_fraction,
            iterations: ov.iterations.or(k.iterations).unwrap_or(5000),
            n_trajectories,
            eval_exact_every: k.eval_exact_every.unwrap_or(10),
            step_control: k.step_control.unwrap_or(true),
            substeps: k.substeps.unwrap_or(10),
        };
        if variant.is_trajectory() && n_trajectories == 0 {
            return Err(invalid("krotov.n_trajectories", "must be at least 1"));
        }
        if variant == Variant::Cross && n_trajectories < 2 {
            return Err(invalid("krotov.n_trajectories", "the cross variant needs at least 2"));
        }
        if krotov.eval_exact_every == 0 {
            return Err(invalid("krotov.eval_exact_every", "must be at least 1"));
        }
        if krotov.substeps == 0 {
            return Err(invalid("krotov.substeps", "must be at least 1"));
        }

        let n = raw.noise.unwrap_or_default();
        let noise_variant = match ov.variant {
            Some(v) if v.is_trajectory() => v,
            _ => parse_variant(n.variant.as_deref().unwrap_or("independent"), "noise.variant")?,
        };
        if !noise_variant.is_trajectory() {
            return Err(invalid("noise.variant", "must be a trajectory variant"));
        }
        let noise = NoiseSection {
            variant: noise_variant.name().to_owned(),
            iterations: n.iterations.unwrap_or(500),
            m_list: ov.m_list.clone().or(n.m_list).unwrap_or_else(|| match noise_variant {
                Variant::Cross => vec![2, 4, 8, 16, 32],
                _ => vec![1, 2, 4, 8, 16, 32],
            }),
            seeds: ov.seeds.or(n.seeds).unwrap_or(5),
            window: n.window.unwrap_or(5),
            order: n.order.unwrap_or(3),
        };
        if noise.m_list.len() < 3 {
            return Err(invalid("noise.m_list", "needs at least 3 trajectory counts"));
        }
        if noise.m_list.contains(&0) {
            return Err(invalid("noise.m_list", "trajectory counts must be at least 1"));
        }
        if noise.seeds == 0 {
            return Err(invalid("noise.seeds", "must be at least 1"));
        }
        if noise.window % 2 == 0 || noise.order >= noise.window {
            return Err(invalid("noise.window", "window must be odd and larger than noise.order"));
        }

        let dir = ov
            .output_dir
            .clone()
            .or(raw.output.and_then(|o| o.dir))
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR));

        let cfg = Self {
            seed: ov.seed.or(raw.seed).unwrap_or(1),
            network,
            guess,
            krotov,
            noise,
            output: OutputSection { dir },
        };
        cfg.spec()
            .validate()
            .map_err(|e| invalid("network", e.to_string()))?;
        Ok(cfg)
    }

    /// Checks the trajectory counts of the noise scan against its variant.
    pub fn check_noise_scan(&self) -> Result<()> {
        let variant = self.noise_variant();
        match self.noise.m_list.iter().find(|&&m| variant == Variant::Cross && m < 2) {
            Some(m) => Err(invalid("noise.m_list", format!("trajectory count {m} is too small for the {variant} variant"))),
            None => Ok(()),
        }
    }

    pub fn spec(&self) -> NetworkSpec {
        let n = &self.network;
        NetworkSpec {
            n_nodes: n.n_nodes,
            g: n.g,
            delta: n.delta,
            kappa: n.kappa,
            duration: n.duration,
            n_steps: n.n_steps,
        }
    }

    pub fn variant(&self) -> Variant {
        self.krotov.variant.parse().expect("variant validated on load")
    }

    pub fn noise_variant(&self) -> Variant {
        self.noise.variant.parse().expect("variant validated on load")
    }

    /// Optimizer settings for `model`, with `λ` scaled per control.
    pub fn krotov_config(&self, model: &NetworkModel) -> trajkrotov::Result<KrotovConfig> {
        let spec = &model.spec;
        let shape = flanked_shape(spec, self.krotov.flank_fraction)?;
        Ok(KrotovConfig {
            variant: self.variant(),
            lambda: model
                .controls
                .iter()
                .map(|mu| scaled_lambda(self.krotov.lambda, mu))
                .collect(),
            shapes: vec![shape; spec.n_nodes],
            n_iterations: self.krotov.iterations,
            n_trajectories: self.krotov.n_trajectories,
            base_seed: self.seed,
            eval_exact_every: self.krotov.eval_exact_every,
            density: self.density_options(),
            step_control: StepControl {
                enabled: self.krotov.step_control,
                ..StepControl::default()
            },
        })
    }

    pub fn density_options(&self) -> DensityOptions {
        DensityOptions {
            substeps: self.krotov.substeps,
            ..DensityOptions::default()
        }
    }

    /// Canonical TOML text of the resolved configuration.
    pub fn effective_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved configuration without its output section,
    /// hex encoded. Runs that differ only in where they write share a hash.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            seed: u64,
            network: &'a NetworkSection,
            guess: &'a GuessSection,
            krotov: &'a KrotovSection,
            noise: &'a NoiseSection,
        }
        let view = Hashed {
            seed: self.seed,
            network: &self.network,
            guess: &self.guess,
            krotov: &self.krotov,
            noise: &self.noise,
        };
        let text = toml::to_string(&view).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        let two = RunConfig::from_toml(TWO_NODE_PRESET, &Overrides::default()).unwrap();
        assert_eq!(two.spec(), NetworkSpec::two_node());
        assert_eq!(two.variant(), Variant::Density);
        let twenty = RunConfig::from_toml(TWENTY_NODE_PRESET, &Overrides::default()).unwrap();
        assert_eq!(twenty.spec(), NetworkSpec::twenty_node());
        assert_eq!(twenty.krotov.eval_exact_every, 50);
    }

    #[test]
    fn missing_field_is_named() {
        let text = TWO_NODE_PRESET.replace("delta = 100.0", "");
        let err = RunConfig::from_toml(&text, &Overrides::default()).unwrap_err();
        assert!(matches!(err, ConfigError::Missing("network.delta")), "{err}");
        assert!(err.to_string().contains("network.delta"));
    }

    #[test]
    fn invalid_values_are_named() {
        let text = TWO_NODE_PRESET.replace("kappa = 1.0", "kappa = -1.0");
        let err = RunConfig::from_toml(&text, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("network.kappa"), "{err}");
        let text = TWO_NODE_PRESET.replace("[krotov]", "[krotov]\nbogus = 3");
        assert!(matches!(RunConfig::from_toml(&text, &Overrides::default()), Err(ConfigError::Parse(_))));
        let ov = Overrides { variant: Some(Variant::Cross), n_traj: Some(1), ..Overrides::default() };
        let err = RunConfig::from_toml(TWO_NODE_PRESET, &ov).unwrap_err();
        assert!(err.to_string().contains("krotov.n_trajectories"), "{err}");
    }

    #[test]
    fn overrides_take_precedence() {
        let ov = Overrides {
            variant: Some(Variant::Independent),
            n_traj: Some(4),
            iterations: Some(7),
            seed: Some(99),
            output_dir: Some("elsewhere".into()),
            m_list: Some(vec![2, 4, 8]),
            seeds: Some(2),
        };
        let cfg = RunConfig::from_toml(TWO_NODE_PRESET, &ov).unwrap();
        assert_eq!(cfg.variant(), Variant::Independent);
        assert_eq!(cfg.krotov.n_trajectories, 4);
        assert_eq!(cfg.krotov.iterations, 7);
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.output.dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.noise.m_list, vec![2, 4, 8]);
        assert_eq!(cfg.noise.seeds, 2);

        let cross = Overrides { variant: Some(Variant::Cross), ..Overrides::default() };
        let cfg = RunConfig::from_toml(TWO_NODE_PRESET, &cross).unwrap();
        assert_eq!(cfg.krotov.n_trajectories, 2);
        assert_eq!(cfg.noise.m_list, vec![2, 4, 8, 16, 32]);
        assert!(cfg.check_noise_scan().is_ok());

        let explicit = TWO_NODE_PRESET.replace("[noise]", "[noise]\nm_list = [1, 2, 4]");
        let cfg = RunConfig::from_toml(&explicit, &cross).unwrap();
        let err = cfg.check_noise_scan().unwrap_err();
        assert!(err.to_string().contains("noise.m_list"), "{err}");
    }

    #[test]
    fn effective_config_round_trips_and_hashes_stably() {
        let cfg = RunConfig::from_toml(TWO_NODE_PRESET, &Overrides::default()).unwrap();
        let again = RunConfig::from_toml(&cfg.effective_toml(), &Overrides::default()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 64);
        let other = RunConfig::from_toml(TWO_NODE_PRESET, &Overrides { seed: Some(2), ..Overrides::default() }).unwrap();
        assert_ne!(cfg.hash(), other.hash());
        let moved = RunConfig::from_toml(TWO_NODE_PRESET, &Overrides { output_dir: Some("x".into()), ..Overrides::default() }).unwrap();
        assert_eq!(cfg.hash(), moved.hash());
    }

    #[test]
    fn lambda_is_scaled_per_control() {
        let cfg = RunConfig::from_toml(TWO_NODE_PRESET, &Overrides::default()).unwrap();
        let model = NetworkModel::new(cfg.spec()).unwrap();
        let k = cfg.krotov_config(&model).unwrap();
        assert!(k.lambda.iter().all(|&l| (l - 2.5e-3).abs() < 1e-15));
    }
}
