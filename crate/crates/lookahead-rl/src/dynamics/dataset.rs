//! Transition dataset: binary container for (s, a, s_next) records.
//!
//! File layout: magic `MBLD`, u16 version (little-endian), u32 header
//! length, JSON header, then `count` records of `(s ‖ a ‖ s_next)` as
//! little-endian f32. States are the packed physical states (goal-free);
//! the header embeds the generating environment config and its hash.

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::{EnvConfig, EnvKind, TaskSpec};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: [u8; 4] = *b"MBLD";
pub const DATASET_VERSION: u16 = 1;

/// Named index group used for per-group error reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub indices: Vec<usize>,
}

/// Feature groups of the packed state, per environment kind.
pub fn feature_groups_for(task: &TaskSpec) -> Vec<FeatureGroup> {
    let g = |name: &str, indices: Vec<usize>| FeatureGroup {
        name: name.to_string(),
        indices,
    };
    match task.cfg.kind {
        EnvKind::GoalPendulum => vec![
            g("joint_position", vec![0]),
            g("joint_velocity", vec![1]),
        ],
        EnvKind::PlanarHand => vec![
            g("joint_position", (0..4).collect()),
            g("joint_velocity", (4..8).collect()),
            g("object_position", vec![8, 9]),
            g("object_orientation", vec![10]),
            g("object_velocity", vec![11, 12, 13]),
        ],
    }
}

/// Hex SHA-256 of the environment config's canonical JSON form.
pub fn env_config_hash(cfg: &EnvConfig) -> String {
    let json = serde_json::to_string(cfg).expect("EnvConfig serializes");
    let mut h = Sha256::new();
    h.update(json.as_bytes());
    format!("{:x}", h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    /// Full environment config the data was collected from.
    pub env: EnvConfig,
    pub env_config_sha256: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub count: usize,
    pub seed: u64,
    pub epsilon_uniform: f64,
    /// Fraction of records (by collection order, from the end) held out for
    /// testing.
    pub test_fraction: f64,
    pub feature_groups: Vec<FeatureGroup>,
    /// State indices holding angles (wrap-aware deltas and errors).
    pub angle_indices: Vec<usize>,
}

impl DatasetHeader {
    pub fn for_task(task: &TaskSpec, count: usize, seed: u64, epsilon_uniform: f64) -> Self {
        DatasetHeader {
            env: task.cfg.clone(),
            env_config_sha256: env_config_hash(&task.cfg),
            state_dim: task.state_dim,
            action_dim: task.action_dim,
            count,
            seed,
            epsilon_uniform,
            test_fraction: 0.1,
            feature_groups: feature_groups_for(task),
            angle_indices: task.angle_indices.clone(),
        }
    }

    pub fn record_len(&self) -> usize {
        2 * self.state_dim + self.action_dim
    }

    fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.action_dim == 0 {
            return Err(Error::config("dataset.state_dim", "dims must be positive"));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::config("dataset.test_fraction", "must lie in [0, 1)"));
        }
        let expected = env_config_hash(&self.env);
        if expected != self.env_config_sha256 {
            return Err(Error::Artifact(format!(
                "dataset env config hash mismatch: header says {}, config hashes to {expected}",
                self.env_config_sha256
            )));
        }
        for group in &self.feature_groups {
            if group.indices.iter().any(|&i| i >= self.state_dim) {
                return Err(Error::config(
                    "dataset.feature_groups",
                    &format!("group `{}` indexes past the state", group.name),
                ));
            }
        }
        Ok(())
    }
}

/// An immutable in-memory dataset. Records are stored flat in collection
/// order; the test split is the final `test_fraction` of records.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    pub header: DatasetHeader,
    data: Vec<f32>,
}

impl TransitionDataset {
    pub fn from_parts(header: DatasetHeader, data: Vec<f32>) -> Result<Self> {
        header.validate()?;
        if data.len() != header.count * header.record_len() {
            return Err(Error::shape(
                "TransitionDataset",
                format!("{} floats ({} records)", header.count * header.record_len(), header.count),
                format!("{}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("transition dataset"));
        }
        Ok(TransitionDataset { header, data })
    }

    pub fn count(&self) -> usize {
        self.header.count
    }

    /// Record `i` as `(s, a, s_next)` slices.
    pub fn record(&self, i: usize) -> (&[f32], &[f32], &[f32]) {
        let rl = self.header.record_len();
        let s = self.header.state_dim;
        let a = self.header.action_dim;
        let base = i * rl;
        (
            &self.data[base..base + s],
            &self.data[base + s..base + s + a],
            &self.data[base + s + a..base + rl],
        )
    }

    pub fn test_count(&self) -> usize {
        (self.header.count as f64 * self.header.test_fraction).floor() as usize
    }

    /// Training records: everything before the held-out tail.
    pub fn train_range(&self) -> Range<usize> {
        0..self.header.count - self.test_count()
    }

    /// Held-out records: the final `test_fraction` by collection order.
    pub fn test_range(&self) -> Range<usize> {
        self.header.count - self.test_count()..self.header.count
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header_json = serde_json::to_vec(&self.header)?;
        let mut buf =
            Vec::with_capacity(10 + header_json.len() + self.data.len() * 4);
        buf.extend_from_slice(&DATASET_MAGIC);
        buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header_json);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let buf = fs::read(path)?;
        Self::parse(&buf)
    }

    fn parse(buf: &[u8]) -> Result<Self> {
        if buf.len() < 4 || buf[0..4] != DATASET_MAGIC {
            return Err(Error::format(0, "bad magic: not a transition dataset".to_string()));
        }
        if buf.len() < 6 {
            return Err(Error::format(4, "file ends inside version field".to_string()));
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != DATASET_VERSION {
            return Err(Error::format(
                4,
                format!("unsupported dataset version {version} (expected {DATASET_VERSION})"),
            ));
        }
        if buf.len() < 10 {
            return Err(Error::format(6, "file ends inside header length".to_string()));
        }
        let header_len = u32::from_le_bytes([buf[6], buf[7], buf[8], buf[9]]) as usize;
        let header_end = 10 + header_len;
        if buf.len() < header_end {
            return Err(Error::format(10, "file ends inside header".to_string()));
        }
        let header: DatasetHeader = serde_json::from_slice(&buf[10..header_end])
            .map_err(|e| Error::format(10, format!("header JSON: {e}")))?;
        let expected = header.count * header.record_len() * 4;
        let body = &buf[header_end..];
        if body.len() != expected {
            return Err(Error::format(
                header_end as u64,
                format!(
                    "record data is {} bytes, header declares {} ({} records)",
                    body.len(),
                    expected,
                    header.count
                ),
            ));
        }
        let mut data = Vec::with_capacity(expected / 4);
        for chunk in body.chunks_exact(4) {
            data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
        }
        Self::from_parts(header, data)
    }
}
