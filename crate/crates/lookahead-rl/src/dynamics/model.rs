//! One-step dynamics models.
//!
//! Both variants predict per-feature z-normalized state deltas:
//! `s_next = s + denormalize(net(normalize(s ‖ a)))`, with angle features
//! wrapped back into (-pi, pi]. The modular variant first runs a Single
//! Joint Model — one small network shared across joints (or one per joint),
//! disambiguated by a one-hot joint index — on each joint's (position,
//! velocity, per-joint reference signal); its predicted next joint values
//! replace the joint features of the trunk input. The trunk never
//! backpropagates into the joint model: the joint model learns from its own
//! auxiliary regression loss only.
//!
//! The per-joint reference signal is the actuation-mapped action (PD target
//! or torque), which generalizes "the action for joint j" to under-actuated
//! synergies where raw action components do not align with joints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::{wrap_angle, EnvConfig, TaskSpec};
use crate::error::{Error, Result};
use crate::nncore::{
    load_checkpoint, mlp_from_tensors, mlp_tensor_entries, save_checkpoint, CheckpointHeader,
    CheckpointMeta, Mlp, MlpSpec, NormStats, Tensor, TensorBuffer,
};
use crate::ppo::EnvFingerprint;
use crate::rng::derive_rng;

/// Anything that maps (state, action) to a next state. Implemented by
/// learned models and by the simulator itself, so controllers can swap
/// between them.
pub trait OneStepModel {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Predict next states for a batch: (B, S) x (B, A) -> (B, S).
    fn predict_batch(&self, states: &TensorBuffer, actions: &TensorBuffer)
        -> Result<TensorBuffer>;

    fn predict(&self, s: &[f32], a: &[f32]) -> Result<Vec<f32>> {
        let st = Tensor::from_vec(&[1, s.len()], s.to_vec())?;
        let at = Tensor::from_vec(&[1, a.len()], a.to_vec())?;
        Ok(self.predict_batch(&st, &at)?.into_data())
    }
}

/// Baseline that predicts no change: `s_next = s`.
#[derive(Debug, Clone)]
pub struct PersistenceModel {
    pub state_dim: usize,
    pub action_dim: usize,
}

impl OneStepModel for PersistenceModel {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn predict_batch(
        &self,
        states: &TensorBuffer,
        actions: &TensorBuffer,
    ) -> Result<TensorBuffer> {
        check_batch_dims(self.state_dim, self.action_dim, states, actions)?;
        Ok(states.clone())
    }
}

pub(crate) fn check_batch_dims(
    state_dim: usize,
    action_dim: usize,
    states: &TensorBuffer,
    actions: &TensorBuffer,
) -> Result<()> {
    if states.cols() != state_dim || actions.cols() != action_dim
        || states.rows() != actions.rows()
    {
        return Err(Error::shape(
            "one-step model input",
            format!("states (B, {state_dim}), actions (B, {action_dim})"),
            format!("states {:?}, actions {:?}", states.shape(), actions.shape()),
        ));
    }
    if !states.all_finite() || !actions.all_finite() {
        return Err(Error::non_finite("one-step model input"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynVariant {
    Monolithic,
    Modular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynModelConfig {
    pub variant: DynVariant,
    /// Trunk hidden widths (each layer: linear -> batch norm -> ReLU ->
    /// dropout).
    pub hidden: Vec<usize>,
    pub dropout: f32,
    /// Single Joint Model hidden widths (modular only).
    pub jm_hidden: Vec<usize>,
    /// One set of joint-model weights shared across joints (vs one net per
    /// joint).
    pub shared_joint_model: bool,
    /// Weight of the joint model's auxiliary regression loss.
    pub aux_weight: f64,
}

impl Default for DynModelConfig {
    fn default() -> Self {
        DynModelConfig {
            variant: DynVariant::Monolithic,
            hidden: vec![64, 64],
            dropout: 0.2,
            jm_hidden: vec![32],
            shared_joint_model: true,
            aux_weight: 1.0,
        }
    }
}

impl DynModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::config("dynamics.hidden", "need positive hidden widths"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dynamics.dropout", "must lie in [0, 1)"));
        }
        if self.variant == DynVariant::Modular
            && (self.jm_hidden.is_empty() || self.jm_hidden.iter().any(|&w| w == 0))
        {
            return Err(Error::config("dynamics.jm_hidden", "need positive hidden widths"));
        }
        if self.aux_weight < 0.0 {
            return Err(Error::config("dynamics.aux_weight", "must be non-negative"));
        }
        Ok(())
    }
}

/// Normalization bundle stored alongside the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynNorms {
    /// Over (s ‖ a) training inputs.
    pub input: NormStats,
    /// Over wrap-aware training deltas (s_next - s).
    pub target: NormStats,
    /// Over per-joint reference signals (modular only; identity otherwise).
    pub joint_ref: NormStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DynArch {
    cfg: DynModelConfig,
    trunk: MlpSpec,
    joint_models: Vec<MlpSpec>,
    n_joints: usize,
    state_dim: usize,
    action_dim: usize,
    env: EnvConfig,
    env_fingerprint: EnvFingerprint,
    angle_indices: Vec<usize>,
}

/// A (possibly trained) dynamics model with everything needed to predict:
/// networks, normalization, and the environment config that defines the
/// per-joint reference mapping.
#[derive(Debug, Clone)]
pub struct DynamicsModel {
    pub cfg: DynModelConfig,
    pub env_cfg: EnvConfig,
    pub task: TaskSpec,
    pub trunk: Mlp<f32>,
    /// Empty for monolithic; one entry when shared; `n_joints` otherwise.
    pub joint_models: Vec<Mlp<f32>>,
    pub norms: DynNorms,
    pub meta: CheckpointMeta,
}

impl DynamicsModel {
    /// Fresh model with the given normalization statistics. Joint position
    /// features are assumed to occupy state indices `0..n_joints` and joint
    /// velocities `n_joints..2*n_joints` (true for every task here).
    pub fn new(
        cfg: DynModelConfig,
        env_cfg: &EnvConfig,
        norms: DynNorms,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let task = TaskSpec::from_config(env_cfg)?;
        let s = task.state_dim;
        let a = task.action_dim;
        let j = task.n_joints;
        if s < 2 * j {
            return Err(Error::shape(
                "dynamics model",
                format!("state with at least {} joint features", 2 * j),
                format!("{s}"),
            ));
        }
        norms.input.validate(s + a, "dynamics input normalization")?;
        norms.target.validate(s, "dynamics target normalization")?;
        norms.joint_ref.validate(j, "joint reference normalization")?;
        let mut rng = derive_rng(seed, "dynamics-init", 0);
        let trunk = Mlp::init(
            MlpSpec::norm_relu_dropout(s + a, &cfg.hidden, s, cfg.dropout),
            &mut rng,
        )?;
        let joint_models = match cfg.variant {
            DynVariant::Monolithic => Vec::new(),
            DynVariant::Modular => {
                let n_nets = if cfg.shared_joint_model { 1 } else { j };
                let spec = MlpSpec::norm_relu_dropout(3 + j, &cfg.jm_hidden, 2, cfg.dropout);
                (0..n_nets)
                    .map(|_| Mlp::init(spec.clone(), &mut rng))
                    .collect::<Result<_>>()?
            }
        };
        Ok(DynamicsModel {
            cfg,
            env_cfg: env_cfg.clone(),
            task,
            trunk,
            joint_models,
            norms,
            meta: CheckpointMeta {
                seed,
                run_id: String::new(),
                step: 0,
            },
        })
    }

    pub fn n_joints(&self) -> usize {
        self.task.n_joints
    }

    /// The joint model driving joint `j` (shared weights alias to index 0).
    pub fn joint_model_index(&self, j: usize) -> usize {
        if self.cfg.shared_joint_model {
            0
        } else {
            j
        }
    }

    /// Normalized (s ‖ a) batch.
    pub fn normalized_input(
        &self,
        states: &TensorBuffer,
        actions: &TensorBuffer,
    ) -> Result<TensorBuffer> {
        check_batch_dims(self.task.state_dim, self.task.action_dim, states, actions)?;
        let b = states.rows();
        let s = self.task.state_dim;
        let a = self.task.action_dim;
        let mut out = Tensor::matrix(b, s + a);
        for r in 0..b {
            let row = out.row_mut(r);
            row[..s].copy_from_slice(states.row(r));
            row[s..].copy_from_slice(actions.row(r));
            self.norms.input.normalize(row);
        }
        Ok(out)
    }

    /// Normalized per-joint reference signals, (B, n_joints).
    pub fn normalized_joint_refs(&self, actions: &TensorBuffer) -> Result<TensorBuffer> {
        let b = actions.rows();
        let j = self.task.n_joints;
        let mut out = Tensor::matrix(b, j);
        for r in 0..b {
            let refs = self.task.joint_reference(actions.row(r));
            let row = out.row_mut(r);
            for (k, v) in refs.iter().enumerate() {
                row[k] = *v as f32;
            }
            self.norms.joint_ref.normalize(row);
        }
        Ok(out)
    }

    /// Joint-model input for joint `j`: (B, 3 + n_joints) rows of
    /// [q_j_norm, qd_j_norm, u_j_norm, one-hot(j)].
    pub fn jm_input(
        &self,
        norm_input: &TensorBuffer,
        refs: &TensorBuffer,
        j: usize,
    ) -> TensorBuffer {
        let b = norm_input.rows();
        let nj = self.task.n_joints;
        let mut out = Tensor::matrix(b, 3 + nj);
        for r in 0..b {
            let row = out.row_mut(r);
            row[0] = norm_input.row(r)[j];
            row[1] = norm_input.row(r)[nj + j];
            row[2] = refs.row(r)[j];
            row[3 + j] = 1.0;
        }
        out
    }

    /// Wrap-aware physical delta of feature `f` between two states.
    pub fn physical_delta(&self, s: &[f32], s_next: &[f32], f: usize) -> f64 {
        let d = s_next[f] as f64 - s[f] as f64;
        if self.task.angle_indices.contains(&f) {
            wrap_angle(d)
        } else {
            d
        }
    }

    /// Normalized full-state delta targets, (B, S).
    pub fn targets(&self, states: &TensorBuffer, next_states: &TensorBuffer) -> TensorBuffer {
        let b = states.rows();
        let s = self.task.state_dim;
        let mut out = Tensor::matrix(b, s);
        for r in 0..b {
            let row = out.row_mut(r);
            for f in 0..s {
                row[f] = self.physical_delta(states.row(r), next_states.row(r), f) as f32;
            }
            self.norms.target.normalize(row);
        }
        out
    }

    /// Normalized (delta q_j, delta qd_j) targets for joint `j`, (B, 2).
    pub fn jm_targets(
        &self,
        states: &TensorBuffer,
        next_states: &TensorBuffer,
        j: usize,
    ) -> TensorBuffer {
        let b = states.rows();
        let nj = self.task.n_joints;
        let mut out = Tensor::matrix(b, 2);
        let (mq, sq) = (self.norms.target.mean[j], self.norms.target.std[j]);
        let (mv, sv) = (self.norms.target.mean[nj + j], self.norms.target.std[nj + j]);
        for r in 0..b {
            let dq = self.physical_delta(states.row(r), next_states.row(r), j) as f32;
            let dv = self.physical_delta(states.row(r), next_states.row(r), nj + j) as f32;
            let row = out.row_mut(r);
            row[0] = (dq - mq) / sq;
            row[1] = (dv - mv) / sv;
        }
        out
    }

    /// Trunk input for the modular variant: the normalized (s ‖ a) batch
    /// with each joint's position/velocity replaced by the joint model's
    /// predicted next values (denormalized, advanced, re-normalized). The
    /// replacement is pure data — no gradient flows back into the joint
    /// models through it.
    pub fn apply_jm_predictions(
        &self,
        norm_input: &TensorBuffer,
        states: &TensorBuffer,
        jm_outputs: &[TensorBuffer],
    ) -> TensorBuffer {
        let mut out = norm_input.clone();
        let nj = self.task.n_joints;
        for (j, jm_out) in jm_outputs.iter().enumerate() {
            let (mq, sq) = (self.norms.target.mean[j], self.norms.target.std[j]);
            let (mv, sv) = (self.norms.target.mean[nj + j], self.norms.target.std[nj + j]);
            let (imq, isq) = (self.norms.input.mean[j], self.norms.input.std[j]);
            let (imv, isv) = (self.norms.input.mean[nj + j], self.norms.input.std[nj + j]);
            let q_is_angle = self.task.angle_indices.contains(&j);
            for r in 0..out.rows() {
                let dq = jm_out.row(r)[0] * sq + mq;
                let dv = jm_out.row(r)[1] * sv + mv;
                let mut q_next = states.row(r)[j] as f64 + dq as f64;
                if q_is_angle {
                    q_next = wrap_angle(q_next);
                }
                let v_next = states.row(r)[nj + j] as f64 + dv as f64;
                let row = out.row_mut(r);
                row[j] = ((q_next as f32) - imq) / isq;
                row[nj + j] = ((v_next as f32) - imv) / isv;
            }
        }
        out
    }

    /// Turn a normalized-delta prediction into next states: denormalize,
    /// add to the current state, wrap angle features.
    pub fn advance(&self, states: &TensorBuffer, delta_norm: &TensorBuffer) -> TensorBuffer {
        let b = states.rows();
        let s = self.task.state_dim;
        let mut out = Tensor::matrix(b, s);
        for r in 0..b {
            let mut delta = delta_norm.row(r).to_vec();
            self.norms.target.denormalize(&mut delta);
            let row = out.row_mut(r);
            for f in 0..s {
                let mut v = states.row(r)[f] as f64 + delta[f] as f64;
                if self.task.angle_indices.contains(&f) {
                    v = wrap_angle(v);
                }
                row[f] = v as f32;
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let arch = DynArch {
            cfg: self.cfg.clone(),
            trunk: self.trunk.spec().clone(),
            joint_models: self.joint_models.iter().map(|m| m.spec().clone()).collect(),
            n_joints: self.task.n_joints,
            state_dim: self.task.state_dim,
            action_dim: self.task.action_dim,
            env: self.env_cfg.clone(),
            env_fingerprint: EnvFingerprint::of(&self.task),
            angle_indices: self.task.angle_indices.clone(),
        };
        let (mut entries, mut tensors) = mlp_tensor_entries("trunk", &self.trunk);
        for (i, jm) in self.joint_models.iter().enumerate() {
            let (e, t) = mlp_tensor_entries(&format!("joint_model{i}"), jm);
            entries.extend(e);
            tensors.extend(t);
        }
        let header = CheckpointHeader {
            kind: "dynamics".to_string(),
            arch: serde_json::to_value(&arch)?,
            tensors: entries,
            norm: serde_json::to_value(&self.norms)?,
            meta: self.meta.clone(),
        };
        save_checkpoint(path, &header, &tensors)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, tensors) = load_checkpoint(path)?;
        if header.kind != "dynamics" {
            return Err(Error::Artifact(format!(
                "{}: expected a dynamics checkpoint, found kind `{}`",
                path.display(),
                header.kind
            )));
        }
        let arch: DynArch = serde_json::from_value(header.arch)?;
        let norms: DynNorms = serde_json::from_value(header.norm)?;
        let task = TaskSpec::from_config(&arch.env)?;
        if task.state_dim != arch.state_dim || task.action_dim != arch.action_dim {
            return Err(Error::Artifact(format!(
                "{}: embedded env dims disagree with declared dims",
                path.display()
            )));
        }
        let mut it = tensors.into_iter();
        let trunk = mlp_from_tensors(&arch.trunk, &mut it)?;
        let mut joint_models = Vec::with_capacity(arch.joint_models.len());
        for spec in &arch.joint_models {
            joint_models.push(mlp_from_tensors(spec, &mut it)?);
        }
        if it.next().is_some() {
            return Err(Error::Artifact(format!(
                "{}: unused tensors after dynamics reconstruction",
                path.display()
            )));
        }
        Ok(DynamicsModel {
            cfg: arch.cfg,
            env_cfg: arch.env,
            task,
            trunk,
            joint_models,
            norms,
            meta: header.meta,
        })
    }
}

impl OneStepModel for DynamicsModel {
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
        let x = self.normalized_input(states, actions)?;
        let trunk_in = match self.cfg.variant {
            DynVariant::Monolithic => x,
            DynVariant::Modular => {
                let refs = self.normalized_joint_refs(actions)?;
                let mut jm_outs = Vec::with_capacity(self.task.n_joints);
                for j in 0..self.task.n_joints {
                    let input = self.jm_input(&x, &refs, j);
                    let net = &self.joint_models[self.joint_model_index(j)];
                    jm_outs.push(net.infer(&input)?);
                }
                self.apply_jm_predictions(&x, states, &jm_outs)
            }
        };
        let delta_norm = self.trunk.infer(&trunk_in)?;
        Ok(self.advance(states, &delta_norm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Actuation, EnvKind};
    use tempfile::tempdir;

    fn identity_norms(task: &TaskSpec) -> DynNorms {
        DynNorms {
            input: NormStats::identity(task.state_dim + task.action_dim),
            target: NormStats::identity(task.state_dim),
            joint_ref: NormStats::identity(task.n_joints),
        }
    }

    fn fresh(env_cfg: &EnvConfig, variant: DynVariant, seed: u64) -> DynamicsModel {
        let task = TaskSpec::from_config(env_cfg).unwrap();
        let cfg = DynModelConfig {
            variant,
            hidden: vec![16],
            jm_hidden: vec![8],
            ..DynModelConfig::default()
        };
        DynamicsModel::new(cfg, env_cfg, identity_norms(&task), seed).unwrap()
    }

    fn zero_last_layer(mlp: &mut Mlp<f32>) {
        let last = mlp.layers.last_mut().unwrap();
        last.w.fill(0.0);
        last.b.fill(0.0);
    }

    /// Delta parameterization: a zeroed output layer (with neutral target
    /// normalization) is the identity map on state, for both variants.
    #[test]
    fn zeroed_output_layer_is_identity() {
        for variant in [DynVariant::Monolithic, DynVariant::Modular] {
            let env_cfg = EnvConfig::planar_hand(Actuation::FullyActuated);
            let mut model = fresh(&env_cfg, variant, 0);
            zero_last_layer(&mut model.trunk);
            let s = vec![0.3f32, -0.1, 0.2, 0.4, 0.0, 0.5, -0.2, 0.1, 0.01, -0.02, 2.0, 0.1, 0.2, -0.3];
            let a = vec![0.1f32, 0.2, -0.3, 0.4];
            let out = model.predict(&s, &a).unwrap();
            assert_eq!(out, s, "{variant:?}");
        }
    }

    #[test]
    fn predict_is_bit_deterministic() {
        let env_cfg = EnvConfig::pendulum();
        let model = fresh(&env_cfg, DynVariant::Modular, 4);
        let s = vec![1.0f32, -0.5];
        let a = vec![0.7f32];
        let one = model.predict(&s, &a).unwrap();
        let two = model.predict(&s, &a).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn angle_features_are_wrapped() {
        let env_cfg = EnvConfig::pendulum();
        let task = TaskSpec::from_config(&env_cfg).unwrap();
        let mut norms = identity_norms(&task);
        // Force a large predicted angle delta through the target mean.
        norms.target.mean[0] = 3.0;
        let cfg = DynModelConfig {
            hidden: vec![8],
            ..DynModelConfig::default()
        };
        let mut model = DynamicsModel::new(cfg, &env_cfg, norms, 0).unwrap();
        zero_last_layer(&mut model.trunk);
        let out = model.predict(&[3.0, 0.0], &[0.0]).unwrap();
        // 3.0 + 3.0 wraps to 6.0 - 2*pi, inside (-pi, pi].
        assert!((out[0] as f64 - (6.0 - std::f64::consts::TAU)).abs() < 1e-6);
        assert!(out[0] > -std::f32::consts::PI && out[0] <= std::f32::consts::PI);
    }

    #[test]
    fn checkpoint_roundtrip_preserves_predictions() {
        for (env_cfg, variant) in [
            (EnvConfig::pendulum(), DynVariant::Monolithic),
            (EnvConfig::planar_hand(Actuation::UnderActuated), DynVariant::Modular),
        ] {
            let model = fresh(&env_cfg, variant, 7);
            let dir = tempdir().unwrap();
            let path = dir.path().join("dyn.ckpt");
            model.save(&path).unwrap();
            let loaded = DynamicsModel::load(&path).unwrap();
            assert_eq!(loaded.cfg, model.cfg);
            assert_eq!(loaded.norms, model.norms);
            let task = &model.task;
            let s = vec![0.1f32; task.state_dim];
            let a = vec![0.2f32; task.action_dim];
            assert_eq!(model.predict(&s, &a).unwrap(), loaded.predict(&s, &a).unwrap());
        }
    }

    #[test]
    fn variants_share_the_predict_contract() {
        let env_cfg = EnvConfig::planar_hand(Actuation::FullyActuated);
        let task = TaskSpec::from_config(&env_cfg).unwrap();
        let mono = fresh(&env_cfg, DynVariant::Monolithic, 1);
        let modular = fresh(&env_cfg, DynVariant::Modular, 1);
        let s = vec![0.05f32; task.state_dim];
        let a = vec![0.5f32; task.action_dim];
        for m in [&mono as &dyn OneStepModel, &modular as &dyn OneStepModel] {
            let out = m.predict(&s, &a).unwrap();
            assert_eq!(out.len(), task.state_dim);
            assert!(out.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn per_joint_weights_build_one_net_per_joint() {
        let env_cfg = EnvConfig::planar_hand(Actuation::FullyActuated);
        let task = TaskSpec::from_config(&env_cfg).unwrap();
        let cfg = DynModelConfig {
            variant: DynVariant::Modular,
            shared_joint_model: false,
            hidden: vec![8],
            jm_hidden: vec![8],
            ..DynModelConfig::default()
        };
        let model = DynamicsModel::new(cfg, &env_cfg, identity_norms(&task), 0).unwrap();
        assert_eq!(model.joint_models.len(), 4);
        assert_eq!(model.joint_model_index(2), 2);
    }

    #[test]
    fn bad_input_shapes_are_rejected() {
        let env_cfg = EnvConfig::pendulum();
        let model = fresh(&env_cfg, DynVariant::Monolithic, 0);
        assert!(model.predict(&[0.0], &[0.0]).is_err()); // state too short
        assert!(model.predict(&[0.0, 0.0], &[0.0, 0.0]).is_err()); // action too long
        assert!(model.predict(&[f32::NAN, 0.0], &[0.0]).is_err());
    }

    #[test]
    fn persistence_model_returns_state() {
        let m = PersistenceModel {
            state_dim: 2,
            action_dim: 1,
        };
        assert_eq!(m.predict(&[0.4, -0.7], &[9.9]).unwrap(), vec![0.4, -0.7]);
    }

    #[test]
    fn jm_input_layout_is_as_documented() {
        let env_cfg = EnvConfig::planar_hand(Actuation::FullyActuated);
        let model = fresh(&env_cfg, DynVariant::Modular, 2);
        let task = &model.task;
        let states = Tensor::from_vec(&[1, task.state_dim], (0..14).map(|i| i as f32 * 0.1).collect()).unwrap();
        let actions = Tensor::from_vec(&[1, 4], vec![0.0f32; 4]).unwrap();
        let x = model.normalized_input(&states, &actions).unwrap();
        let refs = model.normalized_joint_refs(&actions).unwrap();
        let input = model.jm_input(&x, &refs, 2);
        assert_eq!(input.shape(), &[1, 7]);
        let row = input.row(0);
        assert_eq!(row[0], x.row(0)[2]); // q_2
        assert_eq!(row[1], x.row(0)[6]); // qd_2
        assert_eq!(row[2], refs.row(0)[2]); // u_2
        assert_eq!(&row[3..], &[0.0, 0.0, 1.0, 0.0]); // one-hot joint 2
    }

    #[test]
    fn env_kind_is_embedded() {
        let model = fresh(&EnvConfig::pendulum(), DynVariant::Monolithic, 0);
        assert_eq!(model.env_cfg.kind, EnvKind::GoalPendulum);
    }
}
