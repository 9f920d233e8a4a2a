//! Saved policy/value bundles: network weights plus the frozen observation
//! normalization and an environment-layout fingerprint, so downstream
//! consumers (evaluation, lookahead) apply identical preprocessing and can
//! reject incompatible pairings up front.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::{Actuation, EnvKind, TaskSpec};
use crate::error::{Error, Result};
use crate::nncore::{
    load_checkpoint, mlp_from_tensors, mlp_tensor_entries, save_checkpoint, CheckpointHeader,
    CheckpointMeta, GaussianPolicy, Mlp, MlpSpec, NormStats, Tensor, TensorBuffer,
};

/// Environment layout identity embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvFingerprint {
    pub kind: EnvKind,
    pub actuation: Actuation,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub state_dim: usize,
}

impl EnvFingerprint {
    pub fn of(task: &TaskSpec) -> Self {
        EnvFingerprint {
            kind: task.cfg.kind,
            actuation: task.cfg.actuation,
            obs_dim: task.obs_dim,
            action_dim: task.action_dim,
            state_dim: task.state_dim,
        }
    }

    /// Layout compatibility check; fails before any episode runs.
    pub fn check_compatible(&self, task: &TaskSpec, context: &str) -> Result<()> {
        let here = EnvFingerprint::of(task);
        if *self != here {
            return Err(Error::Artifact(format!(
                "{context}: artifact layout {self:?} does not match environment layout {here:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolicyArch {
    trunk: MlpSpec,
    mean_head: MlpSpec,
    logstd_head: MlpSpec,
    env: EnvFingerprint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ValueArch {
    value: MlpSpec,
    env: EnvFingerprint,
}

/// A trained stochastic policy with its frozen observation normalization.
#[derive(Debug, Clone)]
pub struct PolicyArtifact {
    pub policy: GaussianPolicy<f32>,
    pub obs_norm: NormStats,
    pub env: EnvFingerprint,
    pub meta: CheckpointMeta,
}

impl PolicyArtifact {
    pub fn save(&self, path: &Path) -> Result<()> {
        let arch = PolicyArch {
            trunk: self.policy.trunk.spec().clone(),
            mean_head: self.policy.mean_head.spec().clone(),
            logstd_head: self.policy.logstd_head.spec().clone(),
            env: self.env.clone(),
        };
        let (mut entries, mut tensors) = mlp_tensor_entries("trunk", &self.policy.trunk);
        let (e2, t2) = mlp_tensor_entries("mean_head", &self.policy.mean_head);
        let (e3, t3) = mlp_tensor_entries("logstd_head", &self.policy.logstd_head);
        entries.extend(e2);
        entries.extend(e3);
        tensors.extend(t2);
        tensors.extend(t3);
        let header = CheckpointHeader {
            kind: "policy".to_string(),
            arch: serde_json::to_value(&arch)?,
            tensors: entries,
            norm: serde_json::to_value(&self.obs_norm)?,
            meta: self.meta.clone(),
        };
        save_checkpoint(path, &header, &tensors)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, tensors) = load_checkpoint(path)?;
        if header.kind != "policy" {
            return Err(Error::Artifact(format!(
                "{}: expected a policy checkpoint, found kind `{}`",
                path.display(),
                header.kind
            )));
        }
        let arch: PolicyArch = serde_json::from_value(header.arch)?;
        let obs_norm: NormStats = serde_json::from_value(header.norm)?;
        let mut it = tensors.into_iter();
        let trunk = mlp_from_tensors(&arch.trunk, &mut it)?;
        let mean_head = mlp_from_tensors(&arch.mean_head, &mut it)?;
        let logstd_head = mlp_from_tensors(&arch.logstd_head, &mut it)?;
        if it.next().is_some() {
            return Err(Error::Artifact(format!(
                "{}: unused tensors after policy reconstruction",
                path.display()
            )));
        }
        let policy = GaussianPolicy::new(trunk, mean_head, logstd_head)?;
        obs_norm.validate(policy.obs_dim(), "policy obs normalization")?;
        if arch.env.obs_dim != policy.obs_dim() || arch.env.action_dim != policy.action_dim() {
            return Err(Error::Artifact(format!(
                "{}: fingerprint dims disagree with network dims",
                path.display()
            )));
        }
        Ok(PolicyArtifact {
            policy,
            obs_norm,
            env: arch.env,
            meta: header.meta,
        })
    }

    /// Distribution parameters for one raw (unnormalized) observation.
    pub fn dist(&self, raw_obs: &[f32]) -> Result<(Vec<f32>, Vec<f32>)> {
        let mut obs = raw_obs.to_vec();
        self.obs_norm.normalize(&mut obs);
        let t = Tensor::from_vec(&[1, obs.len()], obs)?;
        let (mean, log_std) = self.policy.dist(&t)?;
        Ok((mean.into_data(), log_std.into_data()))
    }

    /// Distribution parameters for a batch of raw observations (B, obs_dim).
    pub fn dist_batch(&self, raw_obs: &TensorBuffer) -> Result<(TensorBuffer, TensorBuffer)> {
        let mut obs = raw_obs.clone();
        for r in 0..obs.rows() {
            self.obs_norm.normalize(obs.row_mut(r));
        }
        self.policy.dist(&obs)
    }
}

/// A trained state-value function with its frozen observation normalization.
#[derive(Debug, Clone)]
pub struct ValueArtifact {
    pub value: Mlp<f32>,
    pub obs_norm: NormStats,
    pub env: EnvFingerprint,
    pub meta: CheckpointMeta,
}

impl ValueArtifact {
    pub fn save(&self, path: &Path) -> Result<()> {
        let arch = ValueArch {
            value: self.value.spec().clone(),
            env: self.env.clone(),
        };
        let (entries, tensors) = mlp_tensor_entries("value", &self.value);
        let header = CheckpointHeader {
            kind: "value".to_string(),
            arch: serde_json::to_value(&arch)?,
            tensors: entries,
            norm: serde_json::to_value(&self.obs_norm)?,
            meta: self.meta.clone(),
        };
        save_checkpoint(path, &header, &tensors)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, tensors) = load_checkpoint(path)?;
        if header.kind != "value" {
            return Err(Error::Artifact(format!(
                "{}: expected a value checkpoint, found kind `{}`",
                path.display(),
                header.kind
            )));
        }
        let arch: ValueArch = serde_json::from_value(header.arch)?;
        let obs_norm: NormStats = serde_json::from_value(header.norm)?;
        let mut it = tensors.into_iter();
        let value = mlp_from_tensors(&arch.value, &mut it)?;
        if it.next().is_some() {
            return Err(Error::Artifact(format!(
                "{}: unused tensors after value reconstruction",
                path.display()
            )));
        }
        if value.output_dim() != 1 {
            return Err(Error::shape("value network output", "1", value.output_dim().to_string()));
        }
        obs_norm.validate(value.input_dim(), "value obs normalization")?;
        Ok(ValueArtifact {
            value,
            obs_norm,
            env: arch.env,
            meta: header.meta,
        })
    }

    /// Value of one raw (unnormalized) observation.
    pub fn predict(&self, raw_obs: &[f32]) -> Result<f32> {
        let mut obs = raw_obs.to_vec();
        self.obs_norm.normalize(&mut obs);
        let t = Tensor::from_vec(&[1, obs.len()], obs)?;
        Ok(self.value.infer(&t)?.data()[0])
    }

    /// Values for a batch of raw observations (B, obs_dim) -> length-B vec.
    pub fn predict_batch(&self, raw_obs: &TensorBuffer) -> Result<Vec<f32>> {
        let mut obs = raw_obs.clone();
        for r in 0..obs.rows() {
            self.obs_norm.normalize(obs.row_mut(r));
        }
        Ok(self.value.infer(&obs)?.into_data())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvConfig;
    use crate::nncore::Activation;
    use crate::rng::derive_rng;
    use tempfile::tempdir;

    fn tiny_policy(task: &TaskSpec) -> PolicyArtifact {
        let mut rng = derive_rng(1, "init", 0);
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
        let mean = Mlp::init(MlpSpec::plain(8, &[], task.action_dim, Activation::Tanh), &mut rng)
            .unwrap();
        let logstd =
            Mlp::init(MlpSpec::plain(8, &[], task.action_dim, Activation::Tanh), &mut rng).unwrap();
        PolicyArtifact {
            policy: GaussianPolicy::new(trunk, mean, logstd).unwrap(),
            obs_norm: NormStats::identity(task.obs_dim),
            env: EnvFingerprint::of(task),
            meta: CheckpointMeta {
                seed: 1,
                run_id: "test".to_string(),
                step: 0,
            },
        }
    }

    #[test]
    fn policy_roundtrip_preserves_outputs() {
        let task = TaskSpec::from_config(&EnvConfig::pendulum()).unwrap();
        let art = tiny_policy(&task);
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        art.save(&path).unwrap();
        let loaded = PolicyArtifact::load(&path).unwrap();
        let obs = vec![0.3f32, -0.2, 0.1, 0.9, 0.05, 0.0];
        let (m1, s1) = art.dist(&obs).unwrap();
        let (m2, s2) = loaded.dist(&obs).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(s1, s2);
        assert_eq!(loaded.env, art.env);
        assert_eq!(loaded.meta.run_id, "test");
    }

    #[test]
    fn value_roundtrip_and_kind_check() {
        let task = TaskSpec::from_config(&EnvConfig::pendulum()).unwrap();
        let mut rng = derive_rng(2, "init", 0);
        let value = Mlp::init(MlpSpec::plain(task.obs_dim, &[8], 1, Activation::Tanh), &mut rng)
            .unwrap();
        let art = ValueArtifact {
            value,
            obs_norm: NormStats::identity(task.obs_dim),
            env: EnvFingerprint::of(&task),
            meta: CheckpointMeta {
                seed: 2,
                run_id: "test".to_string(),
                step: 7,
            },
        };
        let dir = tempdir().unwrap();
        let path = dir.path().join("v.ckpt");
        art.save(&path).unwrap();
        let loaded = ValueArtifact::load(&path).unwrap();
        let obs = vec![0.1f32; task.obs_dim];
        assert_eq!(art.predict(&obs).unwrap(), loaded.predict(&obs).unwrap());
        // Loading a value checkpoint as a policy is rejected by kind.
        assert!(PolicyArtifact::load(&path).is_err());
    }

    #[test]
    fn fingerprint_mismatch_is_rejected() {
        let pend = TaskSpec::from_config(&EnvConfig::pendulum()).unwrap();
        let hand =
            TaskSpec::from_config(&EnvConfig::planar_hand(Actuation::FullyActuated)).unwrap();
        let art = tiny_policy(&pend);
        assert!(art.env.check_compatible(&pend, "test").is_ok());
        assert!(art.env.check_compatible(&hand, "test").is_err());
    }

    #[test]
    fn normalization_is_applied_before_the_network() {
        let task = TaskSpec::from_config(&EnvConfig::pendulum()).unwrap();
        let mut art = tiny_policy(&task);
        let obs = vec![1.0f32; task.obs_dim];
        let (m_id, _) = art.dist(&obs).unwrap();
        art.obs_norm = NormStats {
            mean: vec![1.0; task.obs_dim],
            std: vec![1.0; task.obs_dim],
        };
        let (m_shift, _) = art.dist(&obs).unwrap();
        let zeros = vec![0.0f32; task.obs_dim];
        art.obs_norm = NormStats::identity(task.obs_dim);
        let (m_zero, _) = art.dist(&zeros).unwrap();
        assert_ne!(m_id, m_shift);
        assert_eq!(m_shift, m_zero);
    }
}
