//! Experiment configuration files.
//!
//! A config is a TOML document. Top-level keys:
//!
//! | key          | type    | default | meaning                                   |
//! |--------------|---------|---------|-------------------------------------------|
//! | `slots`      | integer | -       | slots per run                             |
//! | `warmup`     | integer | 0       | leading slots left out of the averages    |
//! | `seed`       | integer | -       | master seed; every run of a sweep uses it |
//! | `output_dir` | string  | `out`   | directory receiving the CSV files         |
//! | `strict`     | bool    | false   | flagged runs make the exit code nonzero   |
//!
//! Sections:
//!
//! - `[network]`: every field of [`NetworkConfig`], all required except
//!   `ee_queue_timebase` (`"slot"` or `"second"`, default `"slot"`).
//!   `utility_kind` is `"linear"` or `"logarithmic"`.
//! - `[arrivals]`: `kind` (`"poisson"`, `"bernoulli"`, `"time_varying_ergodic"`),
//!   `mean_rue`, `mean_hue`, `cap_rue`, `cap_hue` in bits per slot, optional
//!   `packet_bits`, `modulation_depth`, `modulation_period`.
//! - `[channel]`: `noise_power_dbm`, `cell_radius_m`, `min_distance_m` and the
//!   subtables `[channel.pathloss_rrh]`, `[channel.pathloss_hpn]` with
//!   `intercept_db`, `slope_db`. Optional; defaults to the reference scenario.
//! - `[solver]`: dual loop knobs, each optional.
//! - `[baselines]`: `jccro` (default true) and `msr` (default false).
//! - `[sweep]`: `axis` (`"V"`, `"lambda"`, `"ee_req"`) and strictly increasing
//!   `values`. Optional.
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use hcran_core::controller::SolverOptions;
use hcran_core::{ArrivalSpec, ChannelSpec, NetworkConfig, RunSpec, Scheme, SweepAxis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The reference scenario, also shipped as `configs/paper_vi.cfg`.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/paper_vi.cfg");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Baselines {
    pub jccro: bool,
    pub msr: bool,
}

impl Default for Baselines {
    fn default() -> Self {
        Self {
            jccro: true,
            msr: false,
        }
    }
}

impl Baselines {
    pub fn schemes(&self) -> Vec<Scheme> {
        let mut s = Vec::new();
        if self.jccro {
            s.push(Scheme::Jccro);
        }
        if self.msr {
            s.push(Scheme::Msr);
        }
        s
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig<f64>,
    pub arrivals: ArrivalSpec,
    #[serde(default)]
    pub channel: ChannelSpec,
    pub slots: usize,
    #[serde(default)]
    pub warmup: usize,
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub baselines: Baselines,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub strict: bool,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn reference() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("built-in config parses")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return invalid("sweep needs at least one value".into());
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return invalid("sweep values must be finite".into());
            }
            if s.values.windows(2).any(|w| w[0] >= w[1]) {
                return invalid("sweep values must be strictly increasing".into());
            }
        }
        if self.baselines.schemes().is_empty() {
            return invalid("no scheme enabled in [baselines]".into());
        }
        for spec in self.run_specs() {
            let values = self
                .sweep
                .as_ref()
                .map_or(vec![None], |s| s.values.iter().map(|&v| Some((s.axis, v))).collect());
            for v in values {
                let s = match v {
                    Some((axis, v)) => axis.apply(&spec, v),
                    None => spec.clone(),
                };
                s.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// One template per enabled scheme; sweeps are applied on top.
    pub fn run_specs(&self) -> Vec<RunSpec<f64>> {
        self.baselines
            .schemes()
            .into_iter()
            .map(|scheme| RunSpec {
                network: self.network.clone(),
                arrivals: self.arrivals.clone(),
                channel: self.channel.clone(),
                slots: self.slots,
                warmup: self.warmup,
                seed: self.seed,
                scheme,
                solver: self.solver.clone(),
                trace: true,
            })
            .collect()
    }
}

/// Parses `10,100,1000`.
pub fn parse_values(s: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| ConfigError::Invalid(format!("bad sweep value '{v}'")))
        })
        .collect()
}
