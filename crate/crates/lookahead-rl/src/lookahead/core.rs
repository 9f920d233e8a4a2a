//! Sampling-based lookahead: imagine N action sequences with the policy,
//! roll them through a one-step model, score each by discounted imagined
//! reward plus a terminal value, and act with the mean first action of the
//! top-E trajectories.
//!
//! All N trajectories advance in lockstep so each horizon step costs one
//! batched policy forward and one batched model forward. The goal is held
//! fixed across the imagined horizon (imagined successes do not resample
//! it), and imagined rewards reuse the environment's analytic reward on
//! predicted states, with the action-smoothing term chained within each
//! trajectory starting from the live previous action.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::OneStepModel;
use crate::envs::{reward_from_obs, rot_dist, TaskSpec};
use crate::error::{Error, Result};
use crate::nncore::{gaussian_sample, Tensor, TensorBuffer};
use crate::ppo::{PolicyArtifact, ValueArtifact};

/// Where the controller's transition model comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// A trained dynamics checkpoint.
    Learned,
    /// The simulator itself (ground-truth ablation).
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LookaheadConfig {
    /// Number of imagined trajectories (N).
    pub n_trajectories: usize,
    /// Actions imagined per trajectory (H).
    pub horizon: usize,
    /// Trajectories averaged into the executed action (E).
    pub elite: usize,
    /// Discount over imagined steps and the terminal value.
    pub gamma: f64,
    pub model_source: ModelSource,
    /// Bootstrap the terminal value at the state *before* the last imagined
    /// action instead of the state after it (the `gamma^H V` coefficient is
    /// unchanged). Defaults to the successor state, the standard H-step
    /// return.
    pub terminal_at_h: bool,
}

impl Default for LookaheadConfig {
    fn default() -> Self {
        LookaheadConfig {
            n_trajectories: 1024,
            horizon: 2,
            elite: 2,
            gamma: 0.99,
            model_source: ModelSource::Learned,
            terminal_at_h: false,
        }
    }
}

impl LookaheadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::config("lookahead.n_trajectories", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::config("lookahead.horizon", "must be at least 1"));
        }
        if self.elite == 0 || self.elite > self.n_trajectories {
            return Err(Error::config(
                "lookahead.elite",
                "must satisfy 1 <= elite <= n_trajectories",
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("lookahead.gamma", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// N imagined trajectories in lockstep layout: `states[h]` is the (N, S)
/// matrix of all trajectories at horizon step `h` (so `states[0]` repeats
/// the live state), `actions[h]` the (N, A) raw policy samples taken there,
/// `rewards` row n holds trajectory n's per-step rewards.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    pub n: usize,
    pub horizon: usize,
    /// H+1 matrices of shape (N, state_dim).
    pub states: Vec<TensorBuffer>,
    /// H matrices of shape (N, action_dim); raw samples, before clipping.
    pub actions: Vec<TensorBuffer>,
    /// The same actions clipped into the legal box — what the model was fed
    /// and what rewards were computed on.
    pub clipped_actions: Vec<TensorBuffer>,
    /// (N, H).
    pub rewards: TensorBuffer,
    /// Discounted scores; empty until evaluated.
    pub scores: Vec<f64>,
    /// The live previous action when sampling began (starts the smoothing
    /// chain and the value observation at h = 0).
    pub prev_action: Vec<f32>,
    /// Goal held fixed over the horizon.
    pub goal: f64,
}

fn obs_batch(
    task: &TaskSpec,
    states: &TensorBuffer,
    goal: f64,
    prev_actions: &TensorBuffer,
) -> TensorBuffer {
    let n = states.rows();
    let mut obs = Tensor::matrix(n, task.obs_dim);
    for r in 0..n {
        let row = task.build_obs(states.row(r), goal, prev_actions.row(r));
        obs.row_mut(r).copy_from_slice(&row);
    }
    obs
}

/// Imagine `cfg.n_trajectories` rollouts of `cfg.horizon` policy actions
/// through the model, starting from `state` with the given fixed goal.
/// Rewards are filled in; scores are left for [`evaluate_trajectories`].
pub fn sample_trajectories(
    policy: &PolicyArtifact,
    model: &dyn OneStepModel,
    task: &TaskSpec,
    state: &[f32],
    goal: f64,
    prev_action: &[f32],
    cfg: &LookaheadConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrajectoryBatch> {
    cfg.validate()?;
    policy.env.check_compatible(task, "lookahead sampling")?;
    if model.state_dim() != task.state_dim || model.action_dim() != task.action_dim {
        return Err(Error::shape(
            "lookahead model",
            format!("({}, {}) dims", task.state_dim, task.action_dim),
            format!("({}, {})", model.state_dim(), model.action_dim()),
        ));
    }
    if state.len() != task.state_dim || prev_action.len() != task.action_dim {
        return Err(Error::shape(
            "lookahead start",
            format!("state {} dims, prev action {}", task.state_dim, task.action_dim),
            format!("{}, {}", state.len(), prev_action.len()),
        ));
    }
    let n = cfg.n_trajectories;
    let h_len = cfg.horizon;

    let mut first = Tensor::matrix(n, task.state_dim);
    for r in 0..n {
        first.row_mut(r).copy_from_slice(state);
    }
    let mut prev = Tensor::matrix(n, task.action_dim);
    for r in 0..n {
        prev.row_mut(r).copy_from_slice(prev_action);
    }

    let mut states = Vec::with_capacity(h_len + 1);
    states.push(first);
    let mut actions = Vec::with_capacity(h_len);
    let mut clipped_actions = Vec::with_capacity(h_len);
    let mut rewards = Tensor::matrix(n, h_len);

    for h in 0..h_len {
        let obs = obs_batch(task, &states[h], goal, &prev);
        let (means, log_stds) = policy.dist_batch(&obs)?;
        let mut raw = Tensor::matrix(n, task.action_dim);
        for r in 0..n {
            let (a, _) = gaussian_sample(means.row(r), log_stds.row(r), rng);
            raw.row_mut(r).copy_from_slice(&a);
        }
        let mut clipped = raw.clone();
        for r in 0..n {
            task.clip_action(clipped.row_mut(r));
        }

        let next = model.predict_batch(&states[h], &clipped)?;
        for r in 0..n {
            if !next.row(r).iter().all(|v| v.is_finite()) {
                return Err(Error::non_finite(format!(
                    "imagined state for trajectory {r} at horizon step {h}"
                )));
            }
        }

        // Same recipe as the live environment's step, with the goal pinned.
        for r in 0..n {
            let s_next = next.row(r);
            let a = clipped.row(r);
            let dist = rot_dist(task.object_angle(s_next), goal);
            let goal_reached = dist <= task.cfg.goal_tolerance;
            let fell = task.fall(s_next);
            let reward_obs = task.build_obs(s_next, goal, a);
            let r_val =
                reward_from_obs(task, &reward_obs, a, prev.row(r), goal_reached, fell)?;
            rewards.row_mut(r)[h] = r_val as f32;
        }

        prev = clipped.clone();
        states.push(next);
        actions.push(raw);
        clipped_actions.push(clipped);
    }

    Ok(TrajectoryBatch {
        n,
        horizon: h_len,
        states,
        actions,
        clipped_actions,
        rewards,
        scores: Vec::new(),
        prev_action: prev_action.to_vec(),
        goal,
    })
}

/// Fill in each trajectory's score: the discounted sum of imagined rewards
/// plus `gamma^H` times the value of the terminal state (the successor of
/// the last action by default, the state before it under `terminal_at_h`).
pub fn evaluate_trajectories(
    batch: &mut TrajectoryBatch,
    value: &ValueArtifact,
    task: &TaskSpec,
    cfg: &LookaheadConfig,
) -> Result<()> {
    let h_len = batch.horizon;
    let terminal_index = if cfg.terminal_at_h { h_len - 1 } else { h_len };
    // The value net consumes observations; the previous action at states[k]
    // is the (clipped) action taken at k-1, or the live one at k = 0.
    let terminal_prev = if terminal_index == 0 {
        let mut t = Tensor::matrix(batch.n, batch.prev_action.len());
        for r in 0..batch.n {
            t.row_mut(r).copy_from_slice(&batch.prev_action);
        }
        t
    } else {
        batch.clipped_actions[terminal_index - 1].clone()
    };
    let obs = obs_batch(task, &batch.states[terminal_index], batch.goal, &terminal_prev);
    let values = value.predict_batch(&obs)?;

    let gamma_h = cfg.gamma.powi(h_len as i32);
    let mut scores = Vec::with_capacity(batch.n);
    for r in 0..batch.n {
        let mut g = 0.0f64;
        let mut discount = 1.0f64;
        for h in 0..h_len {
            g += discount * batch.rewards.row(r)[h] as f64;
            discount *= cfg.gamma;
        }
        g += gamma_h * values[r] as f64;
        if !g.is_finite() {
            return Err(Error::non_finite(format!("score of trajectory {r}")));
        }
        scores.push(g);
    }
    batch.scores = scores;
    Ok(())
}

/// Indices of the `elite` largest scores, ties broken by ascending
/// trajectory index (deterministic under fixed seeds).
pub fn elite_indices(scores: &[f64], elite: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores validated finite")
            .then(a.cmp(&b))
    });
    order.truncate(elite);
    order
}

/// Mean of the elite trajectories' first (raw) actions.
pub fn select_action(batch: &TrajectoryBatch, elite: usize) -> Result<Vec<f32>> {
    if batch.scores.len() != batch.n {
        return Err(Error::State(
            "trajectory batch has no scores; evaluate it first".into(),
        ));
    }
    if elite == 0 || elite > batch.n {
        return Err(Error::config(
            "lookahead.elite",
            "must satisfy 1 <= elite <= n_trajectories",
        ));
    }
    let chosen = elite_indices(&batch.scores, elite);
    let a_dim = batch.actions[0].cols();
    let mut mean = vec![0.0f64; a_dim];
    for &idx in &chosen {
        for (m, v) in mean.iter_mut().zip(batch.actions[0].row(idx)) {
            *m += *v as f64;
        }
    }
    Ok(mean
        .into_iter()
        .map(|m| (m / chosen.len() as f64) as f32)
        .collect())
}

/// One full control decision: sample, evaluate, select. Pure given the
/// checkpoints, the start context, and the rng state.
#[allow(clippy::too_many_arguments)]
pub fn lookahead_step(
    policy: &PolicyArtifact,
    value: &ValueArtifact,
    model: &dyn OneStepModel,
    task: &TaskSpec,
    state: &[f32],
    goal: f64,
    prev_action: &[f32],
    cfg: &LookaheadConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f32>> {
    let mut batch = sample_trajectories(policy, model, task, state, goal, prev_action, cfg, rng)?;
    evaluate_trajectories(&mut batch, value, task, cfg)?;
    select_action(&batch, cfg.elite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PersistenceModel;
    use crate::envs::{oracle_step, DeskEnv, EnvConfig};
    use crate::nncore::{
        Activation, CheckpointMeta, GaussianPolicy, Mlp, MlpSpec, NormStats,
    };
    use crate::ppo::EnvFingerprint;
    use crate::rng::derive_rng;

    fn test_policy(task: &TaskSpec, seed: u64) -> PolicyArtifact {
        let mut rng = derive_rng(seed, "init", 0);
        let trunk = Mlp::init(
            MlpSpec::new(
                vec![task.obs_dim, 8],
                vec![Activation::Tanh],
                vec![false],
                vec![0.0],
            )
            .unwrap(),
            &mut rng,
        )
        .unwrap();
        let mean =
            Mlp::init(MlpSpec::plain(8, &[], task.action_dim, Activation::Tanh), &mut rng)
                .unwrap();
        let log_std =
            Mlp::init(MlpSpec::plain(8, &[], task.action_dim, Activation::Tanh), &mut rng)
                .unwrap();
        PolicyArtifact {
            policy: GaussianPolicy::new(trunk, mean, log_std).unwrap(),
            obs_norm: NormStats::identity(task.obs_dim),
            env: EnvFingerprint::of(task),
            meta: CheckpointMeta {
                seed,
                run_id: "test".into(),
                step: 0,
            },
        }
    }

    /// Value net computing `w . obs + bias` exactly.
    fn linear_value(task: &TaskSpec, w: &[f32], bias: f32) -> ValueArtifact {
        let mut net = Mlp::zeros(MlpSpec::plain(task.obs_dim, &[], 1, Activation::Tanh)).unwrap();
        net.layers[0].w.row_mut(0).copy_from_slice(w);
        net.layers[0].b.row_mut(0)[0] = bias;
        ValueArtifact {
            value: net,
            obs_norm: NormStats::identity(task.obs_dim),
            env: EnvFingerprint::of(task),
            meta: CheckpointMeta {
                seed: 0,
                run_id: "test".into(),
                step: 0,
            },
        }
    }

    fn constant_value(task: &TaskSpec, c: f32) -> ValueArtifact {
        linear_value(task, &vec![0.0; task.obs_dim], c)
    }

    fn pendulum_setup() -> (EnvConfig, TaskSpec, PolicyArtifact) {
        let env_cfg = EnvConfig::pendulum();
        let task = TaskSpec::from_config(&env_cfg).unwrap();
        let policy = test_policy(&task, 3);
        (env_cfg, task, policy)
    }

    fn small_cfg(n: usize, horizon: usize, elite: usize) -> LookaheadConfig {
        LookaheadConfig {
            n_trajectories: n,
            horizon,
            elite,
            gamma: 0.9,
            model_source: ModelSource::Oracle,
            terminal_at_h: false,
        }
    }

    #[test]
    fn all_first_states_equal_the_live_state() {
        let (_, task, policy) = pendulum_setup();
        let model = PersistenceModel { state_dim: 2, action_dim: 1 };
        let state = [0.4f32, -0.2];
        let mut rng = derive_rng(0, "controller", 0);
        let batch = sample_trajectories(
            &policy, &model, &task, &state, 1.0, &[0.0], &small_cfg(8, 2, 2), &mut rng,
        )
        .unwrap();
        for r in 0..8 {
            assert_eq!(batch.states[0].row(r), &state);
        }
        assert_eq!(batch.states.len(), 3);
        assert_eq!(batch.actions.len(), 2);
    }

    /// With the policy's std collapsed to the clamp floor, every
    /// trajectory takes (numerically) the same actions.
    #[test]
    fn deterministic_policy_collapses_all_trajectories() {
        let (_, task, mut policy) = pendulum_setup();
        for layer in &mut policy.policy.logstd_head.layers {
            layer.w.fill(0.0);
            layer.b.fill(-30.0); // clamps to the log-std floor
        }
        let model = PersistenceModel { state_dim: 2, action_dim: 1 };
        let mut rng = derive_rng(1, "controller", 0);
        let batch = sample_trajectories(
            &policy, &model, &task, &[0.3, 0.0], 1.0, &[0.0], &small_cfg(8, 1, 1), &mut rng,
        )
        .unwrap();
        let first = batch.actions[0].row(0)[0];
        for r in 1..8 {
            assert!((batch.actions[0].row(r)[0] - first).abs() < 1e-6);
        }
    }

    /// Trajectory 0 under the simulator-as-model replays through a live
    /// environment bit-exactly (states and rewards), as long as the goal
    /// is not reached (the live env would resample it).
    #[test]
    fn oracle_trajectories_replay_through_the_environment() {
        struct SimModel {
            task: TaskSpec,
        }
        impl OneStepModel for SimModel {
            fn state_dim(&self) -> usize {
                self.task.state_dim
            }
            fn action_dim(&self) -> usize {
                self.task.action_dim
            }
            fn predict_batch(
                &self,
                states: &TensorBuffer,
                actions: &TensorBuffer,
            ) -> Result<TensorBuffer> {
                let mut out = Tensor::matrix(states.rows(), states.cols());
                for r in 0..states.rows() {
                    out.row_mut(r)
                        .copy_from_slice(&oracle_step(&self.task, states.row(r), actions.row(r))?);
                }
                Ok(out)
            }
        }

        let (env_cfg, task, policy) = pendulum_setup();
        let model = SimModel { task: task.clone() };
        let mut env = DeskEnv::new(&env_cfg, 42).unwrap();
        // A start state hanging down with the goal far away: no imagined or
        // live goal reach in three small-torque steps.
        env.set_packed_state(&[3.0, 0.0]);
        env.set_goal(0.0);
        let state = env.packed_state().to_vec();
        let prev = env.prev_action().to_vec();

        let mut rng = derive_rng(7, "controller", 0);
        let batch = sample_trajectories(
            &policy, &model, &task, &state, env.goal(), &prev, &small_cfg(4, 3, 1), &mut rng,
        )
        .unwrap();

        for h in 0..3 {
            let step = env.step(batch.actions[h].row(0)).unwrap();
            assert!(!step.info.goal_reached, "test premise: goal stays unreached");
            assert_eq!(env.packed_state(), batch.states[h + 1].row(0), "state at h={h}");
            assert_eq!(step.reward, batch.rewards.row(0)[h], "reward at h={h}");
        }
    }

    /// gamma = 0.9, rewards (1, 2), terminal value 10: the score is
    /// 1 + 0.9 * 2 + 0.81 * 10 = 10.9.
    #[test]
    fn hand_computed_two_step_score() {
        let (_, task, _) = pendulum_setup();
        let value = constant_value(&task, 10.0);
        let mut batch = TrajectoryBatch {
            n: 1,
            horizon: 2,
            states: vec![
                Tensor::from_vec(&[1, 2], vec![0.1, 0.0]).unwrap(),
                Tensor::from_vec(&[1, 2], vec![0.2, 0.0]).unwrap(),
                Tensor::from_vec(&[1, 2], vec![0.3, 0.0]).unwrap(),
            ],
            actions: vec![
                Tensor::from_vec(&[1, 1], vec![0.5]).unwrap(),
                Tensor::from_vec(&[1, 1], vec![0.6]).unwrap(),
            ],
            clipped_actions: vec![
                Tensor::from_vec(&[1, 1], vec![0.5]).unwrap(),
                Tensor::from_vec(&[1, 1], vec![0.6]).unwrap(),
            ],
            rewards: Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap(),
            scores: Vec::new(),
            prev_action: vec![0.0],
            goal: 1.0,
        };
        let cfg = small_cfg(1, 2, 1);
        evaluate_trajectories(&mut batch, &value, &task, &cfg).unwrap();
        assert!((batch.scores[0] - 10.9).abs() < 1e-12);
    }

    #[test]
    fn single_step_undiscounted_score_is_the_reward() {
        let (_, task, policy) = pendulum_setup();
        let model = PersistenceModel { state_dim: 2, action_dim: 1 };
        let value = constant_value(&task, 0.0);
        let cfg = LookaheadConfig {
            gamma: 1.0,
            ..small_cfg(4, 1, 1)
        };
        let mut rng = derive_rng(2, "controller", 0);
        let mut batch = sample_trajectories(
            &policy, &model, &task, &[0.5, 0.1], 1.2, &[0.0], &cfg, &mut rng,
        )
        .unwrap();
        evaluate_trajectories(&mut batch, &value, &task, &cfg).unwrap();
        for r in 0..4 {
            assert_eq!(batch.scores[r], batch.rewards.row(r)[0] as f64);
        }
    }

    /// With zero rewards the score is linear in the terminal value.
    #[test]
    fn scores_are_linear_in_the_terminal_value() {
        let (_, task, policy) = pendulum_setup();
        let model = PersistenceModel { state_dim: 2, action_dim: 1 };
        let cfg = small_cfg(4, 2, 1);
        let mut rng = derive_rng(3, "controller", 0);
        let mut batch = sample_trajectories(
            &policy, &model, &task, &[0.5, 0.1], 1.2, &[0.0], &cfg, &mut rng,
        )
        .unwrap();
        batch.rewards.fill(0.0);
        let mut doubled = batch.clone();
        evaluate_trajectories(&mut batch, &constant_value(&task, 3.0), &task, &cfg).unwrap();
        evaluate_trajectories(&mut doubled, &constant_value(&task, 6.0), &task, &cfg).unwrap();
        for r in 0..4 {
            assert!((doubled.scores[r] - 2.0 * batch.scores[r]).abs() < 1e-9);
        }
    }

    /// The switch moves the bootstrap from states[H] to states[H-1]; the
    /// value artifact itself (applied to the right observation) is the
    /// oracle for both readings.
    #[test]
    fn terminal_at_h_bootstraps_the_earlier_state() {
        struct DriftModel;
        impl OneStepModel for DriftModel {
            fn state_dim(&self) -> usize {
                2
            }
            fn action_dim(&self) -> usize {
                1
            }
            fn predict_batch(
                &self,
                states: &TensorBuffer,
                actions: &TensorBuffer,
            ) -> Result<TensorBuffer> {
                let mut out = states.clone();
                for r in 0..out.rows() {
                    out.row_mut(r)[1] += 0.5 + 0.1 * actions.row(r)[0];
                }
                Ok(out)
            }
        }
        let (_, task, policy) = pendulum_setup();
        let model = DriftModel;
        // Value reads the angular-velocity feature, which drifts every
        // step, so states[H-1] and states[H] score differently.
        let mut w = vec![0.0; task.obs_dim];
        w[2] = 1.0;
        let value = linear_value(&task, &w, 0.25);
        let cfg = small_cfg(3, 2, 1);
        let mut rng = derive_rng(4, "controller", 0);
        let mut batch = sample_trajectories(
            &policy, &model, &task, &[0.5, 0.7], 1.2, &[0.0], &cfg, &mut rng,
        )
        .unwrap();
        let mut literal = batch.clone();
        evaluate_trajectories(&mut batch, &value, &task, &cfg).unwrap();
        let cfg_literal = LookaheadConfig {
            terminal_at_h: true,
            ..cfg
        };
        evaluate_trajectories(&mut literal, &value, &task, &cfg_literal).unwrap();
        for r in 0..3 {
            let base: f64 = (0..2)
                .map(|h| cfg.gamma.powi(h as i32) * batch.rewards.row(r)[h] as f64)
                .sum();
            let v_at = |idx: usize| {
                let prev = if idx == 0 {
                    batch.prev_action.clone()
                } else {
                    batch.clipped_actions[idx - 1].row(r).to_vec()
                };
                let obs = task.build_obs(batch.states[idx].row(r), batch.goal, &prev);
                value.predict(&obs).unwrap() as f64
            };
            let gamma_h = cfg.gamma.powi(2);
            assert!((batch.scores[r] - (base + gamma_h * v_at(2))).abs() < 1e-9);
            assert!((literal.scores[r] - (base + gamma_h * v_at(1))).abs() < 1e-9);
            assert!(batch.scores[r] != literal.scores[r]);
        }
    }

    fn scored_batch(scores: Vec<f64>, first_actions: Vec<f32>) -> TrajectoryBatch {
        let n = scores.len();
        TrajectoryBatch {
            n,
            horizon: 1,
            states: vec![Tensor::matrix(n, 2), Tensor::matrix(n, 2)],
            actions: vec![Tensor::from_vec(&[n, 1], first_actions.clone()).unwrap()],
            clipped_actions: vec![Tensor::from_vec(&[n, 1], first_actions).unwrap()],
            rewards: Tensor::matrix(n, 1),
            scores,
            prev_action: vec![0.0],
            goal: 0.0,
        }
    }

    /// Scores (3, 9, 7, 9) with E = 2 select indices 1 and 3 (stable
    /// tie-break), returning the mean of their first actions.
    #[test]
    fn elite_selection_breaks_ties_by_index() {
        let batch = scored_batch(vec![3.0, 9.0, 7.0, 9.0], vec![10.0, 20.0, 30.0, 40.0]);
        assert_eq!(elite_indices(&batch.scores, 2), vec![1, 3]);
        assert_eq!(select_action(&batch, 2).unwrap(), vec![30.0]);
    }

    #[test]
    fn elite_of_one_is_greedy_and_attains_the_max() {
        let batch = scored_batch(vec![3.0, 9.0, 7.0, 9.0], vec![10.0, 20.0, 30.0, 40.0]);
        let idx = elite_indices(&batch.scores, 1);
        assert_eq!(idx, vec![1]);
        assert_eq!(batch.scores[idx[0]], 9.0);
        assert_eq!(select_action(&batch, 1).unwrap(), vec![20.0]);
    }

    #[test]
    fn elite_of_n_averages_everything() {
        let batch = scored_batch(vec![3.0, 9.0, 7.0, 9.0], vec![10.0, 20.0, 30.0, 40.0]);
        assert_eq!(select_action(&batch, 4).unwrap(), vec![25.0]);
    }

    /// The mean score of the elite set is non-increasing as E grows.
    #[test]
    fn elite_mean_score_is_monotone_in_e() {
        let scores = vec![0.3, -1.0, 2.5, 2.5, 0.0, 1.75, -0.25, 4.0];
        let mut prev = f64::INFINITY;
        for e in 1..=scores.len() {
            let chosen = elite_indices(&scores, e);
            let mean = chosen.iter().map(|&i| scores[i]).sum::<f64>() / e as f64;
            assert!(mean <= prev + 1e-12, "e={e}");
            prev = mean;
        }
    }

    /// Adding a constant to every reward shifts every score by
    /// c * (1 + gamma + ... + gamma^{H-1}) and leaves the ranking intact.
    #[test]
    fn reward_shift_preserves_the_selected_set() {
        let (_, task, policy) = pendulum_setup();
        let model = PersistenceModel { state_dim: 2, action_dim: 1 };
        let value = constant_value(&task, 0.5);
        let cfg = small_cfg(16, 2, 4);
        let mut rng = derive_rng(5, "controller", 0);
        let mut batch = sample_trajectories(
            &policy, &model, &task, &[0.5, 0.1], 1.2, &[0.0], &cfg, &mut rng,
        )
        .unwrap();
        let mut shifted = batch.clone();
        let c = 2.5f32;
        for r in 0..16 {
            for h in 0..2 {
                shifted.rewards.row_mut(r)[h] += c;
            }
        }
        evaluate_trajectories(&mut batch, &value, &task, &cfg).unwrap();
        evaluate_trajectories(&mut shifted, &value, &task, &cfg).unwrap();
        let shift = c as f64 * (1.0 + cfg.gamma);
        for r in 0..16 {
            assert!((shifted.scores[r] - batch.scores[r] - shift).abs() < 1e-5);
        }
        assert_eq!(
            elite_indices(&batch.scores, 4),
            elite_indices(&shifted.scores, 4)
        );
    }

    /// N = 1, E = 1 with a shared rng stream degenerates to a direct policy
    /// sample, bit for bit.
    #[test]
    fn degenerate_lookahead_equals_the_policy() {
        let (_, task, policy) = pendulum_setup();
        let model = PersistenceModel { state_dim: 2, action_dim: 1 };
        let value = constant_value(&task, 0.0);
        let state = [0.6f32, -0.4];
        let prev = [0.2f32];
        let goal = 1.5;
        let cfg = small_cfg(1, 1, 1);

        let mut rng_a = derive_rng(11, "controller", 0);
        let chosen = lookahead_step(
            &policy, &value, &model, &task, &state, goal, &prev, &cfg, &mut rng_a,
        )
        .unwrap();

        let mut rng_b = derive_rng(11, "controller", 0);
        let obs = task.build_obs(&state, goal, &prev);
        let (mean, log_std) = policy.dist(&obs).unwrap();
        let direct = gaussian_sample(&mean, &log_std, &mut rng_b).0;
        assert_eq!(chosen, direct);
    }

    /// The selected action lies componentwise inside the range of sampled
    /// first actions.
    #[test]
    fn selected_action_stays_in_the_sampled_hull() {
        let env_cfg = EnvConfig::planar_hand(crate::envs::Actuation::FullyActuated);
        let task = TaskSpec::from_config(&env_cfg).unwrap();
        let policy = test_policy(&task, 6);
        let model = PersistenceModel { state_dim: 14, action_dim: 4 };
        let value = constant_value(&task, 0.0);
        let state = vec![0.1f32; 14];
        let cfg = small_cfg(16, 2, 5);
        let mut rng = derive_rng(12, "controller", 0);
        let mut batch = sample_trajectories(
            &policy, &model, &task, &state, 0.5, &[0.0; 4], &cfg, &mut rng,
        )
        .unwrap();
        evaluate_trajectories(&mut batch, &value, &task, &cfg).unwrap();
        let action = select_action(&batch, cfg.elite).unwrap();
        for d in 0..4 {
            let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
            for r in 0..16 {
                lo = lo.min(batch.actions[0].row(r)[d]);
                hi = hi.max(batch.actions[0].row(r)[d]);
            }
            assert!(action[d] >= lo && action[d] <= hi);
        }
    }

    /// Scalar re-derivation of the whole pipeline: recompute every
    /// trajectory's states, rewards, and score one step at a time from the
    /// sampled actions, then redo the selection — everything must agree
    /// with the batched implementation.
    #[test]
    fn batched_pipeline_matches_sequential_recomputation() {
        struct LinearModel;
        impl OneStepModel for LinearModel {
            fn state_dim(&self) -> usize {
                2
            }
            fn action_dim(&self) -> usize {
                1
            }
            fn predict_batch(
                &self,
                states: &TensorBuffer,
                actions: &TensorBuffer,
            ) -> Result<TensorBuffer> {
                let mut out = states.clone();
                for r in 0..out.rows() {
                    let a = actions.row(r)[0];
                    let row = out.row_mut(r);
                    row[0] += 0.05 * a;
                    row[1] = 0.9 * row[1] + 0.2 * a;
                }
                Ok(out)
            }
        }

        let (_, task, policy) = pendulum_setup();
        let mut w = vec![0.0; task.obs_dim];
        w[1] = 0.7;
        w[2] = -0.3;
        let value = linear_value(&task, &w, 0.1);
        let cfg = small_cfg(12, 3, 4);
        let state = [0.8f32, -0.3];
        let prev = [0.25f32];
        let goal = -1.0;
        let mut rng = derive_rng(13, "controller", 0);
        let mut batch = sample_trajectories(
            &policy, &LinearModel, &task, &state, goal, &prev, &cfg, &mut rng,
        )
        .unwrap();
        evaluate_trajectories(&mut batch, &value, &task, &cfg).unwrap();
        let action = select_action(&batch, cfg.elite).unwrap();

        let mut recomputed_scores = Vec::new();
        for r in 0..cfg.n_trajectories {
            let mut s = state.to_vec();
            let mut prev_a = prev.to_vec();
            let mut g_score = 0.0f64;
            for h in 0..cfg.horizon {
                let mut a = batch.actions[h].row(r).to_vec();
                task.clip_action(&mut a);
                assert_eq!(a.as_slice(), batch.clipped_actions[h].row(r));
                let s_in = Tensor::from_vec(&[1, 2], s.clone()).unwrap();
                let a_in = Tensor::from_vec(&[1, 1], a.clone()).unwrap();
                let next = LinearModel.predict_batch(&s_in, &a_in).unwrap();
                let s_next = next.row(0).to_vec();
                assert_eq!(s_next.as_slice(), batch.states[h + 1].row(r), "state h={h} n={r}");
                let dist = rot_dist(task.object_angle(&s_next), goal);
                let reward = reward_from_obs(
                    &task,
                    &task.build_obs(&s_next, goal, &a),
                    &a,
                    &prev_a,
                    dist <= task.cfg.goal_tolerance,
                    task.fall(&s_next),
                )
                .unwrap();
                assert_eq!(reward as f32, batch.rewards.row(r)[h], "reward h={h} n={r}");
                g_score += cfg.gamma.powi(h as i32) * (reward as f32) as f64;
                prev_a = a;
                s = s_next;
            }
            let terminal_obs = task.build_obs(&s, goal, &prev_a);
            g_score +=
                cfg.gamma.powi(cfg.horizon as i32) * value.predict(&terminal_obs).unwrap() as f64;
            recomputed_scores.push(g_score);
        }
        for r in 0..cfg.n_trajectories {
            assert!((batch.scores[r] - recomputed_scores[r]).abs() < 1e-9, "score n={r}");
        }
        let order = elite_indices(&recomputed_scores, cfg.elite);
        let mut expected = 0.0f64;
        for &i in &order {
            expected += batch.actions[0].row(i)[0] as f64;
        }
        assert_eq!(action[0], (expected / cfg.elite as f64) as f32);
    }

    #[test]
    fn fixed_seed_gives_identical_actions() {
        let (_, task, policy) = pendulum_setup();
        let model = PersistenceModel { state_dim: 2, action_dim: 1 };
        let value = constant_value(&task, 0.0);
        let cfg = small_cfg(8, 2, 3);
        let run = |seed: u64| {
            let mut rng = derive_rng(seed, "controller", 0);
            lookahead_step(
                &policy, &value, &model, &task, &[0.2, 0.1], 0.7, &[0.0], &cfg, &mut rng,
            )
            .unwrap()
        };
        assert_eq!(run(20), run(20));
        assert_ne!(run(20), run(21));
    }

    #[test]
    fn invalid_configs_are_rejected_with_usage_errors() {
        let bad = [
            LookaheadConfig { elite: 0, ..LookaheadConfig::default() },
            LookaheadConfig { elite: 9, n_trajectories: 8, ..LookaheadConfig::default() },
            LookaheadConfig { horizon: 0, ..LookaheadConfig::default() },
            LookaheadConfig { n_trajectories: 0, ..LookaheadConfig::default() },
            LookaheadConfig { gamma: 0.0, ..LookaheadConfig::default() },
            LookaheadConfig { gamma: 1.5, ..LookaheadConfig::default() },
        ];
        for cfg in bad {
            assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
        }
    }

    #[test]
    fn unscored_batch_cannot_select() {
        let (_, task, policy) = pendulum_setup();
        let model = PersistenceModel { state_dim: 2, action_dim: 1 };
        let mut rng = derive_rng(14, "controller", 0);
        let batch = sample_trajectories(
            &policy, &model, &task, &[0.2, 0.1], 0.7, &[0.0], &small_cfg(4, 1, 2), &mut rng,
        )
        .unwrap();
        assert!(select_action(&batch, 2).is_err());
    }
}
