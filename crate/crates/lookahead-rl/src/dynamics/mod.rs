//! One-step dynamics model learning: transition datasets collected from the
//! simulator, monolithic and modular (per-joint) delta-prediction networks,
//! supervised training with early stopping, and model-agnostic evaluation
//! metrics.

mod collect;
mod dataset;
mod model;
mod train;

pub use collect::{collect_transitions, ExplorationConfig};
pub use dataset::{
    env_config_hash, feature_groups_for, DatasetHeader, FeatureGroup, TransitionDataset,
    DATASET_MAGIC, DATASET_VERSION,
};
pub use model::{
    DynModelConfig, DynNorms, DynVariant, DynamicsModel, OneStepModel, PersistenceModel,
};
pub use train::{
    compute_norms, eval_metrics, train_dynamics, DynEpochRecord, DynMetrics, DynSplitMetrics,
    DynTrainConfig, DynTrainOutput, GroupMae, Split,
};
