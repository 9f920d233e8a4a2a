//! Training loop: alternate rollout collection and clipped-surrogate
//! updates, checkpoint periodically, and log a training curve.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{EnvConfig, TaskSpec};
use crate::error::{Error, Result};
use crate::harness::{run_episodes, MetricsSummary, PolicyController};
use crate::nncore::{
    Activation, Adam, AdamConfig, CheckpointMeta, GaussianPolicy, Mlp, MlpSpec, NormStats,
};
use crate::ppo::artifact::{EnvFingerprint, PolicyArtifact, ValueArtifact};
use crate::ppo::rollout::{collect_rollouts, RolloutCtx};
use crate::ppo::update::ppo_update;
use crate::rng::derive_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub num_envs: usize,
    /// Steps collected per env per update (T).
    pub rollout_length: usize,
    pub total_env_steps: u64,
    /// Optimization epochs per update.
    pub epochs: usize,
    pub minibatch_size: usize,
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub value_loss_weight: f64,
    pub entropy_weight: f64,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub obs_normalization: bool,
    /// Hidden widths of the policy trunk (heads are single linear maps).
    pub policy_hidden: Vec<usize>,
    /// Hidden widths of the value network.
    pub value_hidden: Vec<usize>,
    /// Updates between periodic checkpoints (0 = final only).
    pub checkpoint_interval: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            num_envs: 16,
            rollout_length: 256,
            total_env_steps: 2_000_000,
            epochs: 4,
            minibatch_size: 1024,
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            value_loss_weight: 0.5,
            entropy_weight: 1e-3,
            learning_rate: 3e-4,
            max_grad_norm: 0.5,
            obs_normalization: true,
            policy_hidden: vec![32, 32],
            value_hidden: vec![32, 32],
            checkpoint_interval: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: &str| Err(Error::config(format!("ppo.{path}"), msg));
        if self.num_envs == 0 {
            return bad("num_envs", "must be at least 1");
        }
        if self.rollout_length == 0 {
            return bad("rollout_length", "must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if self.minibatch_size == 0 {
            return bad("minibatch_size", "must be at least 1");
        }
        let buffer = self.num_envs * self.rollout_length;
        if buffer % self.minibatch_size.min(buffer) != 0 {
            return bad(
                "minibatch_size",
                &format!("must divide the rollout buffer size {buffer}"),
            );
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", "must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda", "must lie in [0, 1]");
        }
        if self.clip_epsilon <= 0.0 {
            return bad("clip_epsilon", "must be positive");
        }
        if self.learning_rate <= 0.0 {
            return bad("learning_rate", "must be positive");
        }
        if self.max_grad_norm <= 0.0 {
            return bad("max_grad_norm", "must be positive");
        }
        if self.value_loss_weight < 0.0 || self.entropy_weight < 0.0 {
            return bad("value_loss_weight", "loss weights must be non-negative");
        }
        if self.policy_hidden.is_empty() || self.value_hidden.is_empty() {
            return bad("policy_hidden", "at least one hidden layer is required");
        }
        if self.policy_hidden.iter().chain(&self.value_hidden).any(|&w| w == 0) {
            return bad("policy_hidden", "hidden widths must be positive");
        }
        Ok(())
    }
}

/// Freshly initialized policy/value networks for a task. The trunk applies
/// tanh after every layer (its output is a feature vector); both heads are
/// single linear maps; the value net is a plain tanh MLP with scalar output.
/// All weights draw from one stream in a fixed order, so (seed, shapes)
/// determines every parameter.
pub fn build_networks(
    task: &TaskSpec,
    cfg: &PpoConfig,
    seed: u64,
) -> Result<(GaussianPolicy<f32>, Mlp<f32>)> {
    let mut rng = derive_rng(seed, "init", 0);
    let mut trunk_widths = vec![task.obs_dim];
    trunk_widths.extend_from_slice(&cfg.policy_hidden);
    let n_trunk = trunk_widths.len() - 1;
    let trunk_spec = MlpSpec::new(
        trunk_widths,
        vec![Activation::Tanh; n_trunk],
        vec![false; n_trunk],
        vec![0.0; n_trunk],
    )?;
    let features = *cfg.policy_hidden.last().expect("validated non-empty");
    let trunk = Mlp::init(trunk_spec, &mut rng)?;
    let mean_head = Mlp::init(
        MlpSpec::plain(features, &[], task.action_dim, Activation::Tanh),
        &mut rng,
    )?;
    let logstd_head = Mlp::init(
        MlpSpec::plain(features, &[], task.action_dim, Activation::Tanh),
        &mut rng,
    )?;
    let value = Mlp::init(
        MlpSpec::plain(task.obs_dim, &cfg.value_hidden, 1, Activation::Tanh),
        &mut rng,
    )?;
    Ok((GaussianPolicy::new(trunk, mean_head, logstd_head)?, value))
}

/// One line of the training curve (serialized as JSON lines).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRecord {
    pub update: usize,
    pub env_steps: u64,
    pub episodes_completed: usize,
    /// Mean total reward of episodes finished during this update's rollout.
    pub episode_reward_mean: Option<f64>,
    /// Mean per-step reward of those episodes.
    pub episode_reward_per_step: Option<f64>,
    pub episode_length_mean: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub policy_path: PathBuf,
    pub value_path: PathBuf,
    pub curve_path: PathBuf,
    pub updates: usize,
    pub env_steps: u64,
    pub final_policy: PolicyArtifact,
    pub final_value: ValueArtifact,
}

pub(crate) fn env_kind_tag(cfg: &EnvConfig) -> String {
    serde_json::to_value(cfg.kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| "env".to_string())
}

fn make_artifacts(
    policy: &GaussianPolicy<f32>,
    value: &Mlp<f32>,
    norm: NormStats,
    env: &EnvFingerprint,
    seed: u64,
    run_id: &str,
    step: u64,
) -> (PolicyArtifact, ValueArtifact) {
    let meta = CheckpointMeta {
        seed,
        run_id: run_id.to_string(),
        step,
    };
    (
        PolicyArtifact {
            policy: policy.clone(),
            obs_norm: norm.clone(),
            env: env.clone(),
            meta: meta.clone(),
        },
        ValueArtifact {
            value: value.clone(),
            obs_norm: norm,
            env: env.clone(),
            meta,
        },
    )
}

/// Train PPO on an environment. Writes `policy_final.ckpt`,
/// `value_final.ckpt`, periodic `policy_step{N}.ckpt`/`value_step{N}.ckpt`
/// (when `checkpoint_interval > 0`), and `training_curve.jsonl` into
/// `out_dir`. Identical (config, seed) produce identical artifacts.
pub fn train(ppo: &PpoConfig, env_cfg: &EnvConfig, seed: u64, out_dir: &Path) -> Result<TrainOutput> {
    ppo.validate()?;
    env_cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let task = TaskSpec::from_config(env_cfg)?;
    let fingerprint = EnvFingerprint::of(&task);
    let run_id = format!("ppo-{}-seed{}", env_kind_tag(env_cfg), seed);

    let (mut policy, mut value) = build_networks(&task, ppo, seed)?;
    let mut policy_params = policy.trunk.trainable();
    policy_params.extend(policy.mean_head.trainable());
    policy_params.extend(policy.logstd_head.trainable());
    let mut adam_policy = Adam::for_params(AdamConfig::with_lr(ppo.learning_rate), &policy_params);
    drop(policy_params);
    let mut adam_value = Adam::for_params(AdamConfig::with_lr(ppo.learning_rate), &value.trainable());

    let mut ctx = RolloutCtx::new(env_cfg, ppo.num_envs, seed, ppo.obs_normalization)?;
    let mut update_rng = derive_rng(seed, "update", 0);

    let steps_per_update = (ppo.num_envs * ppo.rollout_length) as u64;
    let updates = ppo.total_env_steps.div_ceil(steps_per_update).max(1) as usize;
    let curve_path = out_dir.join("training_curve.jsonl");
    let mut curve = BufWriter::new(fs::File::create(&curve_path)?);

    log::info!(
        "training {} for {} updates of {} env steps (run {run_id})",
        env_kind_tag(env_cfg),
        updates,
        steps_per_update
    );

    let mut env_steps = 0u64;
    for update in 1..=updates {
        let mut buffer = collect_rollouts(&policy, &value, &mut ctx, ppo.rollout_length)?;
        buffer.compute_gae(ppo.gamma, ppo.gae_lambda);
        buffer.normalize_advantages();
        let stats = ppo_update(
            &mut policy,
            &mut value,
            &mut adam_policy,
            &mut adam_value,
            &buffer,
            ppo,
            &mut update_rng,
        )?;
        env_steps += steps_per_update;

        let eps = &buffer.episodes;
        let record = CurveRecord {
            update,
            env_steps,
            episodes_completed: eps.len(),
            episode_reward_mean: (!eps.is_empty())
                .then(|| eps.iter().map(|e| e.reward_total).sum::<f64>() / eps.len() as f64),
            episode_reward_per_step: (!eps.is_empty()).then(|| {
                eps.iter().map(|e| e.reward_total / e.length as f64).sum::<f64>() / eps.len() as f64
            }),
            episode_length_mean: (!eps.is_empty())
                .then(|| eps.iter().map(|e| e.length as f64).sum::<f64>() / eps.len() as f64),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
        };
        writeln!(curve, "{}", serde_json::to_string(&record)?)?;

        if ppo.checkpoint_interval > 0 && update % ppo.checkpoint_interval == 0 && update != updates
        {
            let (pa, va) = make_artifacts(
                &policy,
                &value,
                ctx.norm_stats(),
                &fingerprint,
                seed,
                &run_id,
                env_steps,
            );
            pa.save(&out_dir.join(format!("policy_step{env_steps}.ckpt")))?;
            va.save(&out_dir.join(format!("value_step{env_steps}.ckpt")))?;
        }
        if update % 10 == 0 || update == updates {
            log::info!(
                "update {update}/{updates}: steps {env_steps}, episode reward/step {:?}, \
                 policy loss {:.4}, value loss {:.4}",
                record.episode_reward_per_step,
                stats.policy_loss,
                stats.value_loss
            );
        }
    }
    curve.flush()?;

    let (final_policy, final_value) = make_artifacts(
        &policy,
        &value,
        ctx.norm_stats(),
        &fingerprint,
        seed,
        &run_id,
        env_steps,
    );
    let policy_path = out_dir.join("policy_final.ckpt");
    let value_path = out_dir.join("value_final.ckpt");
    final_policy.save(&policy_path)?;
    final_value.save(&value_path)?;
    Ok(TrainOutput {
        policy_path,
        value_path,
        curve_path,
        updates,
        env_steps,
        final_policy,
        final_value,
    })
}

/// Evaluate a policy by acting directly through it (no lookahead), one
/// episode per seed `seed + i`, mean action when `deterministic`.
pub fn evaluate_policy(
    artifact: &PolicyArtifact,
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
    deterministic: bool,
) -> Result<MetricsSummary> {
    let task = TaskSpec::from_config(env_cfg)?;
    artifact.env.check_compatible(&task, "evaluate_policy")?;
    let outcome = run_episodes(
        || Ok(PolicyController::new(artifact.clone(), deterministic)),
        env_cfg,
        episodes,
        seed,
        1,
    )?;
    Ok(outcome.summary)
}
