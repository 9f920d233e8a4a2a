//! Supervised training and evaluation of one-step dynamics models.
//!
//! Training minimizes mean squared error on normalized state deltas; the
//! modular variant adds a weighted auxiliary regression loss on the joint
//! models' own predictions (the trunk's gradient never reaches the joint
//! models). Early stopping monitors held-out RMSE and restores the best
//! snapshot.
//!
//! Reported metrics: a single RMSE over normalized delta features
//! (normalization derived from the dataset's training split, so the number
//! is comparable across models), plus per-feature-group mean absolute error
//! in physical units, with wrap-aware differences on angle features.

use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dynamics::dataset::TransitionDataset;
use crate::dynamics::model::{
    DynModelConfig, DynNorms, DynVariant, DynamicsModel, OneStepModel,
};
use crate::envs::{wrap_angle, TaskSpec};
use crate::error::{Error, Result};
use crate::nncore::{
    Adam, AdamConfig, Gradients, Mlp, NormStats, RunningNorm, Tensor, TensorBuffer,
};
use crate::ppo::env_kind_tag;
use crate::rng::derive_rng;

/// Records evaluated per prediction batch.
const EVAL_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynTrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without held-out RMSE improvement before stopping (0 = never
    /// stop early).
    pub patience: usize,
    /// Minimum RMSE decrease that counts as an improvement.
    pub min_delta: f64,
    pub model: DynModelConfig,
}

impl Default for DynTrainConfig {
    fn default() -> Self {
        DynTrainConfig {
            learning_rate: 1e-3,
            batch_size: 256,
            epochs: 50,
            patience: 5,
            min_delta: 1e-6,
            model: DynModelConfig::default(),
        }
    }
}

impl DynTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("dynamics.learning_rate", "must be positive and finite"));
        }
        if self.batch_size < 2 {
            return Err(Error::config(
                "dynamics.batch_size",
                "must be at least 2 (batch statistics need two rows)",
            ));
        }
        if self.epochs == 0 {
            return Err(Error::config("dynamics.epochs", "must be at least 1"));
        }
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return Err(Error::config("dynamics.min_delta", "must be non-negative and finite"));
        }
        self.model.validate()
    }
}

/// Which portion of a dataset to evaluate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Mean absolute error of one named feature group, in physical units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupMae {
    pub group: String,
    pub mae: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynSplitMetrics {
    /// Root mean squared error over normalized delta features.
    pub rmse: f64,
    pub mae: Vec<GroupMae>,
    pub records: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynMetrics {
    pub train: DynSplitMetrics,
    pub test: DynSplitMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynEpochRecord {
    pub epoch: usize,
    /// Mean per-batch trunk MSE on normalized deltas.
    pub train_loss: f64,
    /// Mean per-batch joint-model MSE (0 for the monolithic variant).
    pub aux_loss: f64,
    pub test_rmse: f64,
}

#[derive(Debug)]
pub struct DynTrainOutput {
    pub model: DynamicsModel,
    pub metrics: DynMetrics,
    pub curve: Vec<DynEpochRecord>,
    /// Zero-based epoch whose weights the returned model carries.
    pub best_epoch: usize,
}

/// Normalization statistics over the dataset's training split: inputs
/// (s ‖ a), wrap-aware deltas, and per-joint reference signals.
pub fn compute_norms(dataset: &TransitionDataset) -> Result<DynNorms> {
    let header = &dataset.header;
    let task = TaskSpec::from_config(&header.env)?;
    let s_dim = header.state_dim;
    let mut input = RunningNorm::new(s_dim + header.action_dim);
    let mut target = RunningNorm::new(s_dim);
    let mut joint_ref = RunningNorm::new(task.n_joints);
    let mut input_row = vec![0.0f32; s_dim + header.action_dim];
    let mut delta_row = vec![0.0f32; s_dim];
    for i in dataset.train_range() {
        let (s, a, s_next) = dataset.record(i);
        input_row[..s_dim].copy_from_slice(s);
        input_row[s_dim..].copy_from_slice(a);
        input.update(&input_row);
        for f in 0..s_dim {
            let d = s_next[f] as f64 - s[f] as f64;
            delta_row[f] = if header.angle_indices.contains(&f) {
                wrap_angle(d) as f32
            } else {
                d as f32
            };
        }
        target.update(&delta_row);
        let refs: Vec<f32> = task.joint_reference(a).iter().map(|&v| v as f32).collect();
        joint_ref.update(&refs);
    }
    Ok(DynNorms {
        input: input.stats(),
        target: target.stats(),
        joint_ref: joint_ref.stats(),
    })
}

fn gather(
    dataset: &TransitionDataset,
    indices: &[usize],
) -> (TensorBuffer, TensorBuffer, TensorBuffer) {
    let s_dim = dataset.header.state_dim;
    let a_dim = dataset.header.action_dim;
    let b = indices.len();
    let mut states = Tensor::matrix(b, s_dim);
    let mut actions = Tensor::matrix(b, a_dim);
    let mut next_states = Tensor::matrix(b, s_dim);
    for (r, &i) in indices.iter().enumerate() {
        let (s, a, s_next) = dataset.record(i);
        states.row_mut(r).copy_from_slice(s);
        actions.row_mut(r).copy_from_slice(a);
        next_states.row_mut(r).copy_from_slice(s_next);
    }
    (states, actions, next_states)
}

fn eval_range(
    model: &dyn OneStepModel,
    dataset: &TransitionDataset,
    range: Range<usize>,
    target: &NormStats,
) -> Result<DynSplitMetrics> {
    let header = &dataset.header;
    if range.is_empty() {
        return Err(Error::State("cannot evaluate a dynamics model on an empty split".into()));
    }
    if model.state_dim() != header.state_dim || model.action_dim() != header.action_dim {
        return Err(Error::shape(
            "dynamics evaluation",
            format!("model dims ({}, {})", header.state_dim, header.action_dim),
            format!("({}, {})", model.state_dim(), model.action_dim()),
        ));
    }
    let s_dim = header.state_dim;
    let n = range.len();
    let mut sq_sum = 0.0f64;
    let mut abs_sums = vec![0.0f64; s_dim];
    let indices: Vec<usize> = range.collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let (states, actions, next_states) = gather(dataset, chunk);
        let predicted = model.predict_batch(&states, &actions)?;
        for r in 0..chunk.len() {
            for f in 0..s_dim {
                let raw = predicted.row(r)[f] as f64 - next_states.row(r)[f] as f64;
                let err = if header.angle_indices.contains(&f) {
                    wrap_angle(raw)
                } else {
                    raw
                };
                let z = err / target.std[f] as f64;
                sq_sum += z * z;
                abs_sums[f] += err.abs();
            }
        }
    }
    let rmse = (sq_sum / (n * s_dim) as f64).sqrt();
    let mae = header
        .feature_groups
        .iter()
        .map(|g| GroupMae {
            group: g.name.clone(),
            mae: g.indices.iter().map(|&f| abs_sums[f]).sum::<f64>()
                / (n * g.indices.len()) as f64,
        })
        .collect();
    Ok(DynSplitMetrics { rmse, mae, records: n })
}

/// Evaluate any one-step model on a dataset split. RMSE normalization comes
/// from the dataset's training split, independent of the model, so scores
/// are directly comparable (a perfect model scores exactly zero).
pub fn eval_metrics(
    model: &dyn OneStepModel,
    dataset: &TransitionDataset,
    split: Split,
) -> Result<DynSplitMetrics> {
    let target = compute_norms(dataset)?.target;
    let range = match split {
        Split::Train => dataset.train_range(),
        Split::Test => dataset.test_range(),
    };
    eval_range(model, dataset, range, &target)
}

/// Train a dynamics model on the dataset's training split, early-stopping
/// on held-out RMSE, and optionally save the result as a checkpoint.
pub fn train_dynamics(
    dataset: &TransitionDataset,
    cfg: &DynTrainConfig,
    seed: u64,
    out_path: Option<&Path>,
) -> Result<DynTrainOutput> {
    cfg.validate()?;
    if dataset.test_count() == 0 {
        return Err(Error::State(
            "dynamics training needs a non-empty held-out split; collect more transitions"
                .into(),
        ));
    }
    let norms = compute_norms(dataset)?;
    let mut model = DynamicsModel::new(cfg.model.clone(), &dataset.header.env, norms, seed)?;
    model.meta.run_id = format!("dyn-{}-seed{}", env_kind_tag(&dataset.header.env), seed);
    let modular = model.cfg.variant == DynVariant::Modular;
    let nj = model.n_joints();
    let aux_weight = model.cfg.aux_weight;

    let mut adam = {
        let mut params: Vec<&Tensor<f32>> = model.trunk.trainable();
        for jm in &model.joint_models {
            params.extend(jm.trainable());
        }
        Adam::for_params(AdamConfig::with_lr(cfg.learning_rate), &params)
    };

    let target_stats = model.norms.target.clone();
    let mut rng = derive_rng(seed, "dynamics-train", 0);
    let mut indices: Vec<usize> = dataset.train_range().collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best_rmse = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_snapshot: Option<(Mlp<f32>, Vec<Mlp<f32>>)> = None;
    let mut wait = 0usize;

    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut aux_sum = 0.0f64;
        let mut batches = 0usize;
        for batch in indices.chunks(cfg.batch_size) {
            if batch.len() < 2 {
                continue; // batch statistics are undefined on a single row
            }
            let (states, actions, next_states) = gather(dataset, batch);
            let x = model.normalized_input(&states, &actions)?;
            let targets = model.targets(&states, &next_states);

            // Joint models first (modular): their predictions feed the trunk
            // input as plain data.
            let mut jm_batches: Vec<(usize, crate::nncore::ForwardCache<f32>, TensorBuffer)> =
                Vec::new();
            let trunk_in = if modular {
                let refs = model.normalized_joint_refs(&actions)?;
                let mut jm_outs = Vec::with_capacity(nj);
                for j in 0..nj {
                    let input = model.jm_input(&x, &refs, j);
                    let net_index = model.joint_model_index(j);
                    let cache = model.joint_models[net_index].train_forward(&input, &mut rng)?;
                    jm_outs.push(cache.output.clone());
                    jm_batches.push((net_index, cache, model.jm_targets(&states, &next_states, j)));
                }
                model.apply_jm_predictions(&x, &states, &jm_outs)
            } else {
                x
            };

            let trunk_cache = model.trunk.train_forward(&trunk_in, &mut rng)?;
            let out = &trunk_cache.output;
            let b = out.rows();
            let denom = (b * out.cols()) as f64;
            let mut grad = Tensor::matrix(b, out.cols());
            let mut main_loss = 0.0f64;
            for r in 0..b {
                for c in 0..out.cols() {
                    let e = out.row(r)[c] - targets.row(r)[c];
                    main_loss += (e as f64) * (e as f64);
                    grad.row_mut(r)[c] = 2.0 * e / denom as f32;
                }
            }
            main_loss /= denom;

            let mut aux_loss = 0.0f64;
            let mut jm_grads: Vec<Option<Gradients<f32>>> =
                (0..model.joint_models.len()).map(|_| None).collect();
            if modular {
                let aux_denom = (b * 2 * nj) as f64;
                for (net_index, cache, jm_target) in &jm_batches {
                    let o = &cache.output;
                    let mut g = Tensor::matrix(o.rows(), 2);
                    for r in 0..o.rows() {
                        for c in 0..2 {
                            let e = o.row(r)[c] - jm_target.row(r)[c];
                            aux_loss += (e as f64) * (e as f64);
                            g.row_mut(r)[c] = aux_weight as f32 * 2.0 * e / aux_denom as f32;
                        }
                    }
                    let (grads, _) = model.joint_models[*net_index].backward(cache, &g)?;
                    match &mut jm_grads[*net_index] {
                        Some(acc) => acc.add_scaled(&grads, 1.0),
                        slot => *slot = Some(grads),
                    }
                }
                aux_loss /= aux_denom;
            }

            let total = main_loss + aux_weight * aux_loss;
            if !total.is_finite() {
                return Err(Error::Optimizer(format!(
                    "non-finite dynamics loss at epoch {epoch}"
                )));
            }

            let (trunk_grads, _) = model.trunk.backward(&trunk_cache, &grad)?;
            let mut grad_refs: Vec<&Tensor<f32>> = trunk_grads.tensors();
            for slot in &jm_grads {
                grad_refs.extend(
                    slot.as_ref()
                        .expect("every joint model sees every batch")
                        .tensors(),
                );
            }
            let mut param_refs: Vec<&mut Tensor<f32>> = model.trunk.trainable_mut();
            for jm in &mut model.joint_models {
                param_refs.extend(jm.trainable_mut());
            }
            adam.step(&mut param_refs, &grad_refs)?;

            loss_sum += main_loss;
            aux_sum += aux_loss;
            batches += 1;
        }
        if batches == 0 {
            return Err(Error::State("dynamics training split is empty".into()));
        }

        let test = eval_range(&model, dataset, dataset.test_range(), &target_stats)?;
        curve.push(DynEpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            aux_loss: aux_sum / batches as f64,
            test_rmse: test.rmse,
        });
        log::info!(
            "dynamics epoch {epoch}: train loss {:.6}, test rmse {:.6}",
            loss_sum / batches as f64,
            test.rmse
        );
        if test.rmse < best_rmse - cfg.min_delta {
            best_rmse = test.rmse;
            best_epoch = epoch;
            best_snapshot = Some((model.trunk.clone(), model.joint_models.clone()));
            wait = 0;
        } else {
            wait += 1;
            if cfg.patience > 0 && wait >= cfg.patience {
                break;
            }
        }
    }

    if let Some((trunk, joint_models)) = best_snapshot {
        model.trunk = trunk;
        model.joint_models = joint_models;
    }
    model.meta.step = (best_epoch + 1) as u64;

    let metrics = DynMetrics {
        train: eval_range(&model, dataset, dataset.train_range(), &target_stats)?,
        test: eval_range(&model, dataset, dataset.test_range(), &target_stats)?,
    };
    if let Some(path) = out_path {
        model.save(path)?;
    }
    Ok(DynTrainOutput {
        model,
        metrics,
        curve,
        best_epoch,
    })
}
