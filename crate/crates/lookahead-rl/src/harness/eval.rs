//! Single-evaluation driver: load checkpoints, run episodes with the
//! selected controller, and emit per-episode records plus a summary.
//!
//! Artifact compatibility is checked against the evaluation environment
//! before any episode runs, so a mismatched checkpoint fails fast with a
//! descriptive error rather than mid-run.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsModel, OneStepModel};
use crate::envs::{EnvConfig, TaskSpec};
use crate::error::{Error, Result};
use crate::lookahead::{LookaheadConfig, LookaheadController, ModelSource, OracleModel};
use crate::ppo::{EnvFingerprint, PolicyArtifact, ValueArtifact};

use super::metrics::{EpisodeRecord, MetricsSummary};
use super::runner::{run_episodes, EvalOutcome, PolicyController};

/// Default episode count per evaluation.
pub const DEFAULT_EPISODES: usize = 200;

/// Which controller drives the episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Sample (or take the mean of) the policy directly.
    Policy,
    /// Plan with sampled trajectories through the one-step model.
    Lookahead,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerKind::Policy => "policy",
            ControllerKind::Lookahead => "lookahead",
        })
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "policy" => Ok(ControllerKind::Policy),
            "lookahead" => Ok(ControllerKind::Lookahead),
            other => Err(Error::config(
                "controller",
                format!("expected `policy` or `lookahead`, got `{other}`"),
            )),
        }
    }
}

/// Everything one evaluation needs: artifact paths, the (already
/// override-applied) environment config, planner settings, and run shape.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub controller: ControllerKind,
    pub policy: PathBuf,
    /// Required for the lookahead controller.
    pub value: Option<PathBuf>,
    /// Required for the lookahead controller unless
    /// `lookahead.model_source` is `oracle`.
    pub dynamics: Option<PathBuf>,
    pub env: EnvConfig,
    pub lookahead: LookaheadConfig,
    pub episodes: usize,
    pub seed: u64,
    pub threads: usize,
    /// Use the policy mean instead of sampling (policy controller only).
    pub deterministic_policy: bool,
}

impl RunSpec {
    pub fn new(controller: ControllerKind, policy: PathBuf, env: EnvConfig) -> Self {
        RunSpec {
            controller,
            policy,
            value: None,
            dynamics: None,
            env,
            lookahead: LookaheadConfig::default(),
            episodes: DEFAULT_EPISODES,
            seed: 0,
            threads: 1,
            deterministic_policy: false,
        }
    }

    pub(super) fn validate_common(&self) -> Result<()> {
        self.env.validate()?;
        self.lookahead.validate()?;
        if self.episodes == 0 {
            return Err(Error::config("episodes", "at least one episode is required"));
        }
        Ok(())
    }

    pub(super) fn validate_lookahead_inputs(&self) -> Result<()> {
        if self.value.is_none() {
            return Err(Error::config(
                "value",
                "the lookahead controller requires a value checkpoint",
            ));
        }
        if self.lookahead.model_source == ModelSource::Learned && self.dynamics.is_none() {
            return Err(Error::config(
                "dynamics",
                "the lookahead controller requires a dynamics checkpoint \
                 unless model_source = \"oracle\"",
            ));
        }
        Ok(())
    }

    /// Check the invariants required to run `self.controller`.
    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        if self.controller == ControllerKind::Lookahead {
            self.validate_lookahead_inputs()?;
        }
        Ok(())
    }
}

/// Checkpoints loaded once and cloned into per-thread controllers.
pub(super) struct Arms {
    pub(super) policy: PolicyArtifact,
    pub(super) value: Option<ValueArtifact>,
    pub(super) model: Option<Arc<dyn OneStepModel + Send + Sync>>,
}

/// Load (and compatibility-check) the artifacts `spec` needs; with
/// `need_lookahead` the value network and one-step model are loaded even if
/// `spec.controller` is `policy`, so paired runs share one load.
pub(super) fn load_arms(spec: &RunSpec, need_lookahead: bool) -> Result<Arms> {
    let task = TaskSpec::from_config(&spec.env)?;
    let policy = PolicyArtifact::load(&spec.policy)?;
    policy.env.check_compatible(&task, "policy checkpoint")?;
    if !need_lookahead {
        return Ok(Arms {
            policy,
            value: None,
            model: None,
        });
    }
    let value_path = spec.value.as_ref().expect("validated: value present");
    let value = ValueArtifact::load(value_path)?;
    value.env.check_compatible(&task, "value checkpoint")?;
    let model: Arc<dyn OneStepModel + Send + Sync> = match spec.lookahead.model_source {
        ModelSource::Oracle => Arc::new(OracleModel { task }),
        ModelSource::Learned => {
            let path = spec.dynamics.as_ref().expect("validated: dynamics present");
            let dynamics = DynamicsModel::load(path)?;
            EnvFingerprint::of(&dynamics.task).check_compatible(&task, "dynamics checkpoint")?;
            Arc::new(dynamics)
        }
    };
    Ok(Arms {
        policy,
        value: Some(value),
        model: Some(model),
    })
}

pub(super) fn run_arm(spec: &RunSpec, arms: &Arms, kind: ControllerKind) -> Result<EvalOutcome> {
    match kind {
        ControllerKind::Policy => run_episodes(
            || {
                Ok(PolicyController::new(
                    arms.policy.clone(),
                    spec.deterministic_policy,
                ))
            },
            &spec.env,
            spec.episodes,
            spec.seed,
            spec.threads,
        ),
        ControllerKind::Lookahead => {
            let value = arms
                .value
                .as_ref()
                .ok_or_else(|| Error::State("lookahead arm without a value network".into()))?;
            let model = arms
                .model
                .as_ref()
                .ok_or_else(|| Error::State("lookahead arm without a one-step model".into()))?;
            run_episodes(
                || {
                    LookaheadController::new(
                        arms.policy.clone(),
                        value.clone(),
                        model.clone(),
                        spec.lookahead.clone(),
                    )
                },
                &spec.env,
                spec.episodes,
                spec.seed,
                spec.threads,
            )
        }
    }
}

/// Run one evaluation per `spec`. With `out_dir`, writes
/// `episodes_<controller>.jsonl` (one record per line) and
/// `summary_<controller>.csv` there.
pub fn run_eval(spec: &RunSpec, out_dir: Option<&Path>) -> Result<EvalOutcome> {
    spec.validate()?;
    let arms = load_arms(spec, spec.controller == ControllerKind::Lookahead)?;
    let outcome = run_arm(spec, &arms, spec.controller)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_episode_records(
            &dir.join(format!("episodes_{}.jsonl", spec.controller)),
            &outcome.records,
        )?;
        write_summary_csv(
            &dir.join(format!("summary_{}.csv", spec.controller)),
            &[(spec.controller.to_string(), outcome.summary.clone())],
        )?;
    }
    Ok(outcome)
}

/// Both controllers evaluated on identical episode seeds.
#[derive(Debug, Clone)]
pub struct PairedEval {
    pub policy: EvalOutcome,
    pub lookahead: EvalOutcome,
}

/// Run both controllers with the same seeds and environment, loading every
/// artifact once. `spec.controller` is ignored; the lookahead artifact
/// requirements always apply.
pub fn run_paired(spec: &RunSpec) -> Result<PairedEval> {
    spec.validate_common()?;
    spec.validate_lookahead_inputs()?;
    let arms = load_arms(spec, true)?;
    let policy = run_arm(spec, &arms, ControllerKind::Policy)?;
    let lookahead = run_arm(spec, &arms, ControllerKind::Lookahead)?;
    Ok(PairedEval { policy, lookahead })
}

/// Write per-episode records, one structured line each.
pub fn write_episode_records(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read records written by [`write_episode_records`].
pub fn read_episode_records(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        records.push(serde_json::from_str(line)?);
    }
    Ok(records)
}

/// Write labeled summaries as CSV: a `controller` column followed by the
/// fixed [`MetricsSummary`] column order.
pub fn write_summary_csv(path: &Path, rows: &[(String, MetricsSummary)]) -> Result<()> {
    let mut out = format!("controller,{}\n", MetricsSummary::CSV_HEADER);
    for (label, summary) in rows {
        out.push_str(&format!("{label},{}\n", summary.csv_row()));
    }
    fs::write(path, out)?;
    Ok(())
}
