//! Run configuration: one structured text file whose sections mirror each
//! module's own config type, plus a global seed, output directory, and
//! thread cap.
//!
//! Unknown keys are rejected everywhere and every module invariant is
//! enforced at parse time, so a config that parses is a config that runs.
//! The fully resolved config (defaults filled in) is logged once at parse.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynTrainConfig, ExplorationConfig};
use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::harness::{
    ControllerKind, DEFAULT_DENSITY_MULTIPLIERS, DEFAULT_EPISODES, DEFAULT_WARMUP_STEPS,
};
use crate::lookahead::LookaheadConfig;
use crate::ppo::PpoConfig;

/// Dynamics pipeline settings: how much data to collect, how to explore
/// while collecting, and how to train the one-step model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    /// Transitions to collect for model training.
    pub transitions: usize,
    pub exploration: ExplorationConfig,
    pub train: DynTrainConfig,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        DynamicsSection {
            transitions: 100_000,
            exploration: ExplorationConfig::default(),
            train: DynTrainConfig::default(),
        }
    }
}

/// Evaluation, sweep, and benchmark settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub controller: ControllerKind,
    pub episodes: usize,
    /// Use the policy mean instead of sampling (policy controller only).
    pub deterministic_policy: bool,
    /// Density multipliers for `sweep-density`.
    pub density_multipliers: Vec<f64>,
    /// `(N, H)` grid for `bench`.
    pub bench_grid: Vec<(usize, usize)>,
    /// Untimed control steps before each benchmark measurement.
    pub bench_warmup: usize,
    /// Timed control steps per benchmark measurement.
    pub bench_steps: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            controller: ControllerKind::Policy,
            episodes: DEFAULT_EPISODES,
            deterministic_policy: false,
            density_multipliers: DEFAULT_DENSITY_MULTIPLIERS.to_vec(),
            bench_grid: vec![(64, 1), (64, 2), (1024, 1), (1024, 2)],
            bench_warmup: DEFAULT_WARMUP_STEPS,
            bench_steps: 500,
        }
    }
}

/// The whole pipeline's configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Global seed; each component derives its own stream from it.
    pub seed: u64,
    /// Directory all artifacts are written under.
    pub out_dir: PathBuf,
    /// Worker-thread cap for evaluations; 1 means bit-exact reproducibility.
    pub threads: usize,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub dynamics: DynamicsSection,
    pub lookahead: LookaheadConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            threads: 1,
            env: EnvConfig::pendulum(),
            ppo: PpoConfig::default(),
            dynamics: DynamicsSection::default(),
            lookahead: LookaheadConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.ppo.validate()?;
        self.dynamics.train.validate()?;
        self.lookahead.validate()?;
        if self.threads == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        if self.dynamics.transitions == 0 {
            return Err(Error::config(
                "dynamics.transitions",
                "must be at least 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.dynamics.exploration.epsilon_uniform) {
            return Err(Error::config(
                "dynamics.exploration.epsilon_uniform",
                "must lie in [0, 1]",
            ));
        }
        if self.eval.episodes == 0 {
            return Err(Error::config("eval.episodes", "must be at least 1"));
        }
        if self.eval.density_multipliers.is_empty() {
            return Err(Error::config(
                "eval.density_multipliers",
                "at least one multiplier is required",
            ));
        }
        for &m in &self.eval.density_multipliers {
            if !m.is_finite() || m <= 0.0 {
                return Err(Error::config(
                    "eval.density_multipliers",
                    format!("multipliers must be positive, got {m}"),
                ));
            }
        }
        for &(n, h) in &self.eval.bench_grid {
            if n == 0 || h == 0 {
                return Err(Error::config(
                    "eval.bench_grid",
                    format!("entries must be >= 1, got [{n}, {h}]"),
                ));
            }
        }
        if self.eval.bench_steps == 0 {
            return Err(Error::config("eval.bench_steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Read, parse, and validate a config file. Missing sections take their
/// defaults; the fully resolved config is logged once.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Toml(format!("{}: {e}", path.display())))?;
    let cfg: RunConfig = toml::from_str(&text)
        .map_err(|e| Error::Toml(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    match toml::to_string_pretty(&cfg) {
        Ok(resolved) => log::info!("resolved config ({}):\n{resolved}", path.display()),
        Err(e) => log::warn!("config resolved but not re-serializable: {e}"),
    }
    Ok(cfg)
}
