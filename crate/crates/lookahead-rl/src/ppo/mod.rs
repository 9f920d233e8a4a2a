//! Proximal policy optimization: actor-critic training on the desk
//! environments, producing the policy and value artifacts consumed by the
//! sampling-based lookahead controller.

mod artifact;
mod gae;
mod rollout;
mod trainer;
mod update;

pub use artifact::{EnvFingerprint, PolicyArtifact, ValueArtifact};
pub use gae::gae;
pub use rollout::{collect_rollouts, EpisodeStats, RolloutBuffer, RolloutCtx};
pub use trainer::{
    build_networks, evaluate_policy, train, CurveRecord, PpoConfig, TrainOutput,
};
pub use update::{ppo_update, UpdateStats};

pub(crate) use trainer::env_kind_tag;
