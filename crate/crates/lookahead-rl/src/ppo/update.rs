//! Clipped-surrogate policy/value update over a rollout buffer.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nncore::{
    clip_global_norm, Adam, GaussianPolicy, Mlp, Tensor, LOG_STD_MAX, LOG_STD_MIN,
};
use crate::ppo::rollout::RolloutBuffer;
use crate::ppo::trainer::PpoConfig;

/// Averages over all minibatches of one update call.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct UpdateStats {
    /// Mean negated clipped surrogate (excludes the entropy term).
    pub policy_loss: f64,
    /// Mean squared error of the value prediction (unweighted).
    pub value_loss: f64,
    /// Mean policy entropy.
    pub entropy: f64,
    /// Fraction of samples whose ratio left [1-eps, 1+eps].
    pub clip_fraction: f64,
    /// Mean (log p_old - log p_new), a cheap KL proxy.
    pub approx_kl: f64,
    pub minibatches: usize,
}

const LN_2PI: f64 = 1.8378770664093453;

/// Run `cfg.epochs` passes of minibatch SGD over the buffer. Advantages must
/// already be normalized. Gradients of each network are globally norm-clipped
/// before its Adam step. A non-finite loss aborts with the batch index;
/// parameters retain their values from the last completed minibatch.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    policy: &mut GaussianPolicy<f32>,
    value: &mut Mlp<f32>,
    adam_policy: &mut Adam<f32>,
    adam_value: &mut Adam<f32>,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    let n = buffer.len();
    let mb = cfg.minibatch_size.min(n);
    if n % mb != 0 {
        return Err(Error::Optimizer(format!(
            "minibatch size {mb} does not divide buffer size {n}"
        )));
    }
    let obs_dim = buffer.observations.cols();
    let action_dim = buffer.actions.cols();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();

    for epoch in 0..cfg.epochs {
        indices.shuffle(rng);
        for (mb_idx, chunk) in indices.chunks(mb).enumerate() {
            let b = chunk.len();
            let mut obs = Tensor::matrix(b, obs_dim);
            for (r, &i) in chunk.iter().enumerate() {
                obs.row_mut(r).copy_from_slice(buffer.observations.row(i));
            }

            // ---- Policy forward ----
            let trunk_cache = policy.trunk.train_forward(&obs, rng)?;
            let mean_cache = policy.mean_head.train_forward(&trunk_cache.output, rng)?;
            let logstd_cache = policy.logstd_head.train_forward(&trunk_cache.output, rng)?;

            let mut d_mean = Tensor::matrix(b, action_dim);
            let mut d_logstd = Tensor::matrix(b, action_dim);
            let mut policy_loss = 0.0f64;
            let mut entropy_sum = 0.0f64;
            let mut kl_sum = 0.0f64;
            let mut clipped = 0usize;
            let inv_b = 1.0 / b as f64;

            for (r, &i) in chunk.iter().enumerate() {
                let mean_row = mean_cache.output.row(r);
                let logstd_row = logstd_cache.output.row(r);
                let action_row = buffer.actions.row(i);
                let adv = buffer.advantages[i] as f64;

                // Log-density under the clamped log-std, plus entropy.
                let mut lp = 0.0f64;
                let mut entropy = 0.0f64;
                let mut z = vec![0.0f64; action_dim];
                let mut sigma = vec![0.0f64; action_dim];
                let mut clamp_active = vec![false; action_dim];
                for k in 0..action_dim {
                    let raw = logstd_row[k] as f64;
                    let ls = raw.clamp(LOG_STD_MIN as f64, LOG_STD_MAX as f64);
                    clamp_active[k] = raw <= LOG_STD_MIN as f64 || raw >= LOG_STD_MAX as f64;
                    sigma[k] = ls.exp();
                    z[k] = (action_row[k] as f64 - mean_row[k] as f64) / sigma[k];
                    lp += -0.5 * LN_2PI - ls - 0.5 * z[k] * z[k];
                    entropy += ls + 0.5 * (LN_2PI + 1.0);
                }
                let ratio = (lp - buffer.log_probs[i] as f64).exp();
                let unclipped = ratio * adv;
                let clip_ratio = ratio.clamp(1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
                let surrogate = unclipped.min(clip_ratio * adv);
                policy_loss -= surrogate * inv_b;
                entropy_sum += entropy * inv_b;
                kl_sum += (buffer.log_probs[i] as f64 - lp) * inv_b;
                if (ratio - 1.0).abs() > cfg.clip_epsilon {
                    clipped += 1;
                }

                // d(-surrogate)/d(log p): active only on the unclipped branch.
                let g_lp = if unclipped <= clip_ratio * adv {
                    -adv * ratio * inv_b
                } else {
                    0.0
                };
                for k in 0..action_dim {
                    d_mean.row_mut(r)[k] = (g_lp * z[k] / sigma[k]) as f32;
                    let g_ls = if clamp_active[k] {
                        0.0
                    } else {
                        g_lp * (z[k] * z[k] - 1.0) - cfg.entropy_weight * inv_b
                    };
                    d_logstd.row_mut(r)[k] = g_ls as f32;
                }
            }

            // ---- Value forward ----
            let value_cache = value.train_forward(&obs, rng)?;
            let mut d_value = Tensor::matrix(b, 1);
            let mut value_loss = 0.0f64;
            for (r, &i) in chunk.iter().enumerate() {
                let err = value_cache.output.row(r)[0] as f64 - buffer.returns[i] as f64;
                value_loss += err * err * inv_b;
                d_value.row_mut(r)[0] = (cfg.value_loss_weight * 2.0 * err * inv_b) as f32;
            }

            if !policy_loss.is_finite() || !value_loss.is_finite() {
                return Err(Error::Optimizer(format!(
                    "non-finite loss at epoch {epoch}, minibatch {mb_idx} \
                     (policy {policy_loss}, value {value_loss})"
                )));
            }

            // ---- Backward + step: policy ----
            let (g_mean, d_trunk_a) = policy.mean_head.backward(&mean_cache, &d_mean)?;
            let (g_logstd, mut d_trunk) = policy.logstd_head.backward(&logstd_cache, &d_logstd)?;
            for (acc, add) in d_trunk.data_mut().iter_mut().zip(d_trunk_a.data()) {
                *acc += *add;
            }
            let (g_trunk, _) = policy.trunk.backward(&trunk_cache, &d_trunk)?;
            let mut grads = g_trunk;
            let mut grad_tensors = grads.tensors_mut();
            let mut g_mean = g_mean;
            let mut g_logstd = g_logstd;
            grad_tensors.extend(g_mean.tensors_mut());
            grad_tensors.extend(g_logstd.tensors_mut());
            clip_global_norm(&mut grad_tensors, cfg.max_grad_norm);
            let grad_refs: Vec<&Tensor<f32>> = grad_tensors.iter().map(|t| &**t).collect();
            let mut params = policy.trunk.trainable_mut();
            params.extend(policy.mean_head.trainable_mut());
            params.extend(policy.logstd_head.trainable_mut());
            adam_policy
                .step(&mut params, &grad_refs)
                .map_err(|e| Error::Optimizer(format!("policy step, epoch {epoch} minibatch {mb_idx}: {e}")))?;

            // ---- Backward + step: value ----
            let (mut g_value, _) = value.backward(&value_cache, &d_value)?;
            let mut vt = g_value.tensors_mut();
            clip_global_norm(&mut vt, cfg.max_grad_norm);
            let v_refs: Vec<&Tensor<f32>> = vt.iter().map(|t| &**t).collect();
            adam_value
                .step(&mut value.trainable_mut(), &v_refs)
                .map_err(|e| Error::Optimizer(format!("value step, epoch {epoch} minibatch {mb_idx}: {e}")))?;

            stats.policy_loss += policy_loss;
            stats.value_loss += value_loss;
            stats.entropy += entropy_sum;
            stats.approx_kl += kl_sum;
            stats.clip_fraction += clipped as f64 / b as f64;
            stats.minibatches += 1;
        }
    }
    let m = stats.minibatches.max(1) as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.approx_kl /= m;
    stats.clip_fraction /= m;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{EnvConfig, TaskSpec};
    use crate::nncore::{AdamConfig, Activation, MlpSpec};
    use crate::ppo::rollout::{collect_rollouts, RolloutCtx};
    use crate::rng::derive_rng;

    fn nets(env_cfg: &EnvConfig, seed: u64) -> (GaussianPolicy<f32>, Mlp<f32>) {
        let task = TaskSpec::from_config(env_cfg).unwrap();
        let mut rng = derive_rng(seed, "init", 0);
        let trunk = Mlp::init(
            MlpSpec::new(
                vec![task.obs_dim, 16],
                vec![Activation::Tanh],
                vec![false],
                vec![0.0],
            )
            .unwrap(),
            &mut rng,
        )
        .unwrap();
        let mean =
            Mlp::init(MlpSpec::plain(16, &[], task.action_dim, Activation::Tanh), &mut rng)
                .unwrap();
        let logstd =
            Mlp::init(MlpSpec::plain(16, &[], task.action_dim, Activation::Tanh), &mut rng)
                .unwrap();
        let value =
            Mlp::init(MlpSpec::plain(task.obs_dim, &[16], 1, Activation::Tanh), &mut rng).unwrap();
        (GaussianPolicy::new(trunk, mean, logstd).unwrap(), value)
    }

    fn adams(policy: &GaussianPolicy<f32>, value: &Mlp<f32>, lr: f64) -> (Adam<f32>, Adam<f32>) {
        let mut p = policy.trunk.trainable();
        p.extend(policy.mean_head.trainable());
        p.extend(policy.logstd_head.trainable());
        (
            Adam::for_params(AdamConfig::with_lr(lr), &p),
            Adam::for_params(AdamConfig::with_lr(lr), &value.trainable()),
        )
    }

    fn small_cfg() -> PpoConfig {
        PpoConfig {
            num_envs: 2,
            rollout_length: 16,
            minibatch_size: 32,
            epochs: 1,
            ..PpoConfig::default()
        }
    }

    fn filled_buffer(
        env_cfg: &EnvConfig,
        policy: &GaussianPolicy<f32>,
        value: &Mlp<f32>,
    ) -> RolloutBuffer {
        let mut ctx = RolloutCtx::new(env_cfg, 2, 0, true).unwrap();
        let mut buf = collect_rollouts(policy, value, &mut ctx, 16).unwrap();
        buf.compute_gae(0.99, 0.95);
        buf.normalize_advantages();
        buf
    }

    /// First minibatch of the first epoch sees ratios of exactly 1, so with
    /// one full-buffer minibatch the surrogate loss is the negated advantage
    /// mean: zero after normalization. Nothing crosses the clip boundary.
    #[test]
    fn first_update_has_unit_ratios_and_zero_loss() {
        let env_cfg = EnvConfig::pendulum();
        let (mut policy, mut value) = nets(&env_cfg, 1);
        let buf = filled_buffer(&env_cfg, &policy, &value);
        let cfg = small_cfg();
        let (mut ap, mut av) = adams(&policy, &value, cfg.learning_rate);
        let mut rng = derive_rng(0, "update", 0);
        let stats =
            ppo_update(&mut policy, &mut value, &mut ap, &mut av, &buf, &cfg, &mut rng).unwrap();
        assert!(stats.policy_loss.abs() < 1e-5, "loss {}", stats.policy_loss);
        assert!(stats.approx_kl.abs() < 1e-6, "kl {}", stats.approx_kl);
        assert_eq!(stats.clip_fraction, 0.0);
        assert_eq!(stats.minibatches, 1);
        assert!(stats.entropy.is_finite());
    }

    /// Forced clipped branch: old log-probs shifted so every ratio is 1.5
    /// with advantage 1 and eps = 0.2. The per-sample objective is
    /// min(1.5, 1.2) = 1.2, and with zero entropy weight the policy gradient
    /// vanishes entirely, so parameters do not move.
    #[test]
    fn clipped_branch_freezes_policy() {
        let env_cfg = EnvConfig::pendulum();
        let (mut policy, mut value) = nets(&env_cfg, 2);
        let mut buf = filled_buffer(&env_cfg, &policy, &value);
        for lp in &mut buf.log_probs {
            *lp -= 1.5f32.ln(); // new/old ratio becomes exactly 1.5
        }
        for a in &mut buf.advantages {
            *a = 1.0;
        }
        let mut cfg = small_cfg();
        cfg.entropy_weight = 0.0;
        let (mut ap, mut av) = adams(&policy, &value, cfg.learning_rate);
        let before = policy.clone();
        let mut rng = derive_rng(0, "update", 0);
        let stats =
            ppo_update(&mut policy, &mut value, &mut ap, &mut av, &buf, &cfg, &mut rng).unwrap();
        assert!((stats.policy_loss + 1.2).abs() < 1e-4, "loss {}", stats.policy_loss);
        assert_eq!(stats.clip_fraction, 1.0);
        assert_eq!(policy, before, "clipped branch must produce zero policy gradient");
    }

    /// Gradient direction: repeated updates on a fixed buffer push the
    /// surrogate loss down (the optimizer optimizes what it claims to).
    #[test]
    fn repeated_updates_reduce_surrogate_loss() {
        let env_cfg = EnvConfig::pendulum();
        let (mut policy, mut value) = nets(&env_cfg, 3);
        let buf = filled_buffer(&env_cfg, &policy, &value);
        let mut cfg = small_cfg();
        cfg.epochs = 1;
        cfg.learning_rate = 1e-3;
        let (mut ap, mut av) = adams(&policy, &value, cfg.learning_rate);
        let mut rng = derive_rng(0, "update", 0);
        let mut losses = Vec::new();
        for _ in 0..12 {
            let s = ppo_update(&mut policy, &mut value, &mut ap, &mut av, &buf, &cfg, &mut rng)
                .unwrap();
            losses.push(s.policy_loss);
        }
        assert!(
            losses.last().unwrap() < &-1e-3,
            "surrogate should improve: {losses:?}"
        );
    }

    #[test]
    fn non_finite_advantage_reports_batch_index() {
        let env_cfg = EnvConfig::pendulum();
        let (mut policy, mut value) = nets(&env_cfg, 4);
        let mut buf = filled_buffer(&env_cfg, &policy, &value);
        buf.advantages[0] = f32::NAN;
        let cfg = small_cfg();
        let (mut ap, mut av) = adams(&policy, &value, cfg.learning_rate);
        let mut rng = derive_rng(0, "update", 0);
        let err = ppo_update(&mut policy, &mut value, &mut ap, &mut av, &buf, &cfg, &mut rng)
            .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("minibatch 0"), "error was: {text}");
    }

    #[test]
    fn value_regression_moves_toward_returns() {
        let env_cfg = EnvConfig::pendulum();
        let (mut policy, mut value) = nets(&env_cfg, 5);
        let buf = filled_buffer(&env_cfg, &policy, &value);
        let mut cfg = small_cfg();
        // Adam moves each parameter by at most ~lr per step, so fitting
        // returns of magnitude ~20 on a fixed batch needs a learning rate
        // sized for that scale and a clip that stays out of the way.
        cfg.learning_rate = 0.03;
        cfg.epochs = 1;
        cfg.max_grad_norm = 100.0;
        let (mut ap, mut av) = adams(&policy, &value, cfg.learning_rate);
        let mut rng = derive_rng(0, "update", 0);
        let first = ppo_update(&mut policy, &mut value, &mut ap, &mut av, &buf, &cfg, &mut rng)
            .unwrap()
            .value_loss;
        let mut last = first;
        for _ in 0..60 {
            last = ppo_update(&mut policy, &mut value, &mut ap, &mut av, &buf, &cfg, &mut rng)
                .unwrap()
                .value_loss;
        }
        assert!(last < first * 0.5, "value loss {first} -> {last}");
    }
}
