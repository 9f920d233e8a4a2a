//! Rollout collection across a bank of lockstep environments.

use rand_chacha::ChaCha8Rng;

use crate::envs::{DeskEnv, EnvConfig};
use crate::error::{Error, Result};
use crate::nncore::{
    gaussian_sample, GaussianPolicy, Mlp, NormStats, RunningNorm, Tensor, TensorBuffer,
};
use crate::ppo::gae::gae;
use crate::rng::{derive_rng, episode_seed};

/// Totals for one finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub reward_total: f64,
    pub length: u32,
    pub successes: u32,
}

/// Persistent collection state: the environment bank, its raw observations,
/// per-env sampling streams, running observation normalization, and
/// partial-episode accumulators. Environments carry over between rollouts.
#[derive(Debug, Clone)]
pub struct RolloutCtx {
    pub envs: Vec<DeskEnv>,
    obs: Vec<Vec<f32>>,
    sample_rngs: Vec<ChaCha8Rng>,
    running: RunningNorm,
    normalize: bool,
    ep_reward: Vec<f64>,
}

impl RolloutCtx {
    /// Environment `i` is seeded with `seed + i`; its sampling stream is a
    /// separate derivation of the same seed.
    pub fn new(env_cfg: &EnvConfig, num_envs: usize, seed: u64, normalize: bool) -> Result<Self> {
        let envs: Vec<DeskEnv> = (0..num_envs)
            .map(|i| DeskEnv::new(env_cfg, episode_seed(seed, i as u64)))
            .collect::<Result<_>>()?;
        let obs: Vec<Vec<f32>> = envs.iter().map(|e| e.obs()).collect();
        let obs_dim = obs[0].len();
        Ok(RolloutCtx {
            sample_rngs: (0..num_envs)
                .map(|i| derive_rng(seed, "rollout", i as u64))
                .collect(),
            running: RunningNorm::new(obs_dim),
            normalize,
            ep_reward: vec![0.0; num_envs],
            envs,
            obs,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs[0].len()
    }

    /// Current observation normalization (identity when disabled).
    pub fn norm_stats(&self) -> NormStats {
        if self.normalize {
            self.running.stats()
        } else {
            NormStats::identity(self.obs_dim())
        }
    }
}

/// One rollout's worth of transitions, flattened with row index
/// `env * t_len + t`. `observations` are stored already normalized with the
/// statistics in effect when each step was taken, so re-running the policy
/// on the buffer reproduces the collection-time distribution parameters.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub num_envs: usize,
    pub t_len: usize,
    pub observations: TensorBuffer,
    pub actions: TensorBuffer,
    pub log_probs: Vec<f32>,
    pub rewards: Vec<f32>,
    pub values: Vec<f32>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f32>,
    pub returns: Vec<f32>,
    /// Value prediction for each env's state after the final step.
    pub bootstrap: Vec<f32>,
    /// Episodes that finished during this rollout.
    pub episodes: Vec<EpisodeStats>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.num_envs * self.t_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fill advantages/returns from rewards, values, dones, and bootstrap.
    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) {
        for env in 0..self.num_envs {
            let lo = env * self.t_len;
            let hi = lo + self.t_len;
            let (adv, ret) = gae(
                &self.rewards[lo..hi],
                &self.values[lo..hi],
                &self.dones[lo..hi],
                self.bootstrap[env],
                gamma,
                lambda,
            );
            self.advantages[lo..hi].copy_from_slice(&adv);
            self.returns[lo..hi].copy_from_slice(&ret);
        }
    }

    /// Shift/scale advantages to zero mean and unit std over the whole
    /// buffer. Returns the pre-normalization (mean, std).
    pub fn normalize_advantages(&mut self) -> (f64, f64) {
        let n = self.advantages.len() as f64;
        let mean = self.advantages.iter().map(|&a| a as f64).sum::<f64>() / n;
        let var = self
            .advantages
            .iter()
            .map(|&a| (a as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        let std = var.sqrt();
        for a in &mut self.advantages {
            *a = ((*a as f64 - mean) / (std + 1e-8)) as f32;
        }
        (mean, std)
    }
}

/// Step every environment `t_len` times under the current policy, recording
/// transitions, value predictions, and sampling log-densities. Episodes that
/// end are reset in place and their totals reported in `episodes`.
pub fn collect_rollouts(
    policy: &GaussianPolicy<f32>,
    value: &Mlp<f32>,
    ctx: &mut RolloutCtx,
    t_len: usize,
) -> Result<RolloutBuffer> {
    let num_envs = ctx.envs.len();
    let obs_dim = ctx.obs_dim();
    let action_dim = policy.action_dim();
    let n = num_envs * t_len;
    let mut buffer = RolloutBuffer {
        num_envs,
        t_len,
        observations: Tensor::matrix(n, obs_dim),
        actions: Tensor::matrix(n, action_dim),
        log_probs: vec![0.0; n],
        rewards: vec![0.0; n],
        values: vec![0.0; n],
        dones: vec![false; n],
        advantages: vec![0.0; n],
        returns: vec![0.0; n],
        bootstrap: vec![0.0; num_envs],
        episodes: Vec::new(),
    };

    let mut batch = Tensor::matrix(num_envs, obs_dim);
    for t in 0..t_len {
        if ctx.normalize {
            for i in 0..num_envs {
                ctx.running.update(&ctx.obs[i]);
            }
        }
        let stats = ctx.norm_stats();
        for i in 0..num_envs {
            let row = batch.row_mut(i);
            row.copy_from_slice(&ctx.obs[i]);
            stats.normalize(row);
        }
        let (means, log_stds) = policy.dist(&batch)?;
        let values = value.infer(&batch)?;
        for i in 0..num_envs {
            let (action, log_prob) =
                gaussian_sample(means.row(i), log_stds.row(i), &mut ctx.sample_rngs[i]);
            let step = ctx.envs[i]
                .step(&action)
                .map_err(|e| Error::State(format!("stepping env {i}: {e}")))?;

            let idx = i * t_len + t;
            buffer.observations.row_mut(idx).copy_from_slice(batch.row(i));
            buffer.actions.row_mut(idx).copy_from_slice(&action);
            buffer.log_probs[idx] = log_prob;
            buffer.rewards[idx] = step.reward;
            buffer.values[idx] = values.row(i)[0];
            let done = step.terminated || step.truncated;
            buffer.dones[idx] = done;

            ctx.ep_reward[i] += step.reward as f64;
            if done {
                buffer.episodes.push(EpisodeStats {
                    reward_total: ctx.ep_reward[i],
                    length: ctx.envs[i].step_count(),
                    successes: step.info.consecutive_successes,
                });
                ctx.ep_reward[i] = 0.0;
                ctx.obs[i] = ctx.envs[i].reset();
            } else {
                ctx.obs[i] = step.obs;
            }
        }
    }

    // Bootstrap values for the states the rollout stopped in.
    let stats = ctx.norm_stats();
    for i in 0..num_envs {
        let row = batch.row_mut(i);
        row.copy_from_slice(&ctx.obs[i]);
        stats.normalize(row);
    }
    let boot = value.infer(&batch)?;
    for i in 0..num_envs {
        buffer.bootstrap[i] = boot.row(i)[0];
    }
    Ok(buffer)
}
