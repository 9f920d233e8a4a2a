//! Transition collection with an exploratory policy.
//!
//! Rolls full episodes with the stochastic policy; with probability
//! `epsilon_uniform` each action is replaced by a uniform draw over the
//! legal action box. Records hold the packed physical state before and
//! after each control step and the action actually applied (post-clip).

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{DeskEnv, EnvConfig, TaskSpec};
use crate::error::Result;
use crate::nncore::gaussian_sample;
use crate::ppo::PolicyArtifact;
use crate::rng::{derive_rng, episode_seed};

use super::dataset::{DatasetHeader, TransitionDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorationConfig {
    /// Probability of replacing the policy action with a uniform legal one.
    pub epsilon_uniform: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            epsilon_uniform: 0.1,
        }
    }
}

/// Collect exactly `count` transitions. Episode `e` uses environment seed
/// `seed + e` and its own exploration stream, so datasets are reproducible.
/// The dataset is also written to `out_path` when given.
pub fn collect_transitions(
    policy: &PolicyArtifact,
    env_cfg: &EnvConfig,
    count: usize,
    exploration: &ExplorationConfig,
    seed: u64,
    out_path: Option<&Path>,
) -> Result<TransitionDataset> {
    let task = TaskSpec::from_config(env_cfg)?;
    policy.env.check_compatible(&task, "collect_transitions")?;
    if !(0.0..=1.0).contains(&exploration.epsilon_uniform) {
        return Err(crate::error::Error::config(
            "exploration.epsilon_uniform",
            "must lie in [0, 1]",
        ));
    }
    let header = DatasetHeader::for_task(&task, count, seed, exploration.epsilon_uniform);
    let mut data = Vec::with_capacity(count * header.record_len());

    let mut recorded = 0usize;
    let mut episode = 0u64;
    while recorded < count {
        let ep_seed = episode_seed(seed, episode);
        let mut env = DeskEnv::new(env_cfg, ep_seed)?;
        let mut rng = derive_rng(ep_seed, "explore", 0);
        loop {
            let state_before = env.packed_state().to_vec();
            let obs = env.obs();
            let (mean, log_std) = policy.dist(&obs)?;
            let mut action = if rng.gen::<f64>() < exploration.epsilon_uniform {
                task.uniform_action(&mut rng)
            } else {
                gaussian_sample(&mean, &log_std, &mut rng).0
            };
            task.clip_action(&mut action);
            let step = env.step(&action)?;
            data.extend_from_slice(&state_before);
            data.extend_from_slice(&action);
            data.extend_from_slice(env.packed_state());
            recorded += 1;
            if recorded == count || step.terminated || step.truncated {
                break;
            }
        }
        episode += 1;
    }

    let dataset = TransitionDataset::from_parts(header, data)?;
    if let Some(path) = out_path {
        dataset.write(path)?;
    }
    Ok(dataset)
}
