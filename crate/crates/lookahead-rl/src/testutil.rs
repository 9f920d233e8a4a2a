//! Hand-sized artifact constructors shared by module tests. Everything here
//! is deterministic in its `seed` argument and cheap to build.

use crate::dynamics::{DynModelConfig, DynNorms, DynamicsModel};
use crate::envs::{EnvConfig, TaskSpec};
use crate::nncore::{Activation, CheckpointMeta, GaussianPolicy, Mlp, MlpSpec, NormStats};
use crate::ppo::{EnvFingerprint, PolicyArtifact, ValueArtifact};
use crate::rng::derive_rng;

fn meta(seed: u64) -> CheckpointMeta {
    CheckpointMeta {
        seed,
        run_id: "test".into(),
        step: 0,
    }
}

/// Randomly initialized 8-unit tanh policy over the task's observation space.
pub(crate) fn tiny_policy(task: &TaskSpec, seed: u64) -> PolicyArtifact {
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
    let mean = Mlp::init(
        MlpSpec::plain(8, &[], task.action_dim, Activation::Tanh),
        &mut rng,
    )
    .unwrap();
    let log_std = Mlp::init(
        MlpSpec::plain(8, &[], task.action_dim, Activation::Tanh),
        &mut rng,
    )
    .unwrap();
    PolicyArtifact {
        policy: GaussianPolicy::new(trunk, mean, log_std).unwrap(),
        obs_norm: NormStats::identity(task.obs_dim),
        env: EnvFingerprint::of(task),
        meta: meta(seed),
    }
}

/// Randomly initialized 8-unit tanh value network.
pub(crate) fn tiny_value(task: &TaskSpec, seed: u64) -> ValueArtifact {
    let mut rng = derive_rng(seed, "init", 1);
    let value = Mlp::init(
        MlpSpec::plain(task.obs_dim, &[8], 1, Activation::Tanh),
        &mut rng,
    )
    .unwrap();
    ValueArtifact {
        value,
        obs_norm: NormStats::identity(task.obs_dim),
        env: EnvFingerprint::of(task),
        meta: meta(seed),
    }
}

/// Dynamics model whose zeroed output layer plus identity normalization
/// makes it predict `s_next = s` exactly — a persistence model that still
/// exercises the full network prediction path.
pub(crate) fn identity_dynamics(env_cfg: &EnvConfig, seed: u64) -> DynamicsModel {
    let task = TaskSpec::from_config(env_cfg).unwrap();
    let cfg = DynModelConfig {
        hidden: vec![8],
        dropout: 0.0,
        ..DynModelConfig::default()
    };
    let norms = DynNorms {
        input: NormStats::identity(task.state_dim + task.action_dim),
        target: NormStats::identity(task.state_dim),
        joint_ref: NormStats::identity(task.n_joints),
    };
    let mut model = DynamicsModel::new(cfg, env_cfg, norms, seed).unwrap();
    let last = model.trunk.layers.last_mut().unwrap();
    last.w.fill(0.0);
    last.b.fill(0.0);
    model
}

/// Pendulum config with a short episode cap for fast tests.
pub(crate) fn fast_pendulum(max_episode_steps: u32) -> EnvConfig {
    let mut cfg = EnvConfig::pendulum();
    cfg.max_episode_steps = max_episode_steps;
    cfg
}
