//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! bytes 0..4   magic "MBLC"
//! bytes 4..6   format version (u16), currently 1
//! bytes 6..10  header length in bytes (u32)
//! ...          UTF-8 JSON header
//! ...          tensor data: f32 little-endian, tensors in header order
//! ```
//!
//! The header declares the checkpoint kind, an architecture description,
//! named tensor shapes in file order, normalization statistics, and
//! provenance metadata (seed, run id, training step). Loading validates the
//! magic, version, header integrity, exact payload length, and finiteness of
//! every tensor element; malformed files are reported with the byte offset
//! where the problem was detected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::mlp::{Mlp, MlpSpec};
use crate::nncore::tensor::TensorBuffer;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MBLC";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub run_id: String,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    /// "policy", "value", or "dynamics".
    pub kind: String,
    /// Kind-specific architecture description.
    pub arch: serde_json::Value,
    /// Tensor names and shapes, in file order.
    pub tensors: Vec<TensorEntry>,
    /// Kind-specific normalization statistics.
    pub norm: serde_json::Value,
    pub meta: CheckpointMeta,
}

/// Serialize a checkpoint to `path`. Tensor count/shapes must match the
/// header and every element must be finite.
pub fn save_checkpoint(
    path: &Path,
    header: &CheckpointHeader,
    tensors: &[&TensorBuffer],
) -> Result<()> {
    if header.tensors.len() != tensors.len() {
        return Err(Error::shape(
            "save_checkpoint",
            format!("{} tensors per header", header.tensors.len()),
            format!("{}", tensors.len()),
        ));
    }
    for (entry, t) in header.tensors.iter().zip(tensors) {
        if entry.shape != t.shape() {
            return Err(Error::shape(
                format!("save_checkpoint tensor `{}`", entry.name),
                format!("{:?}", entry.shape),
                format!("{:?}", t.shape()),
            ));
        }
        if !t.all_finite() {
            return Err(Error::non_finite(format!("checkpoint tensor `{}`", entry.name)));
        }
    }
    let header_json = serde_json::to_vec(header)?;
    let data_len: usize = tensors.iter().map(|t| t.len() * 4).sum();
    let mut buf = Vec::with_capacity(10 + header_json.len() + data_len);
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_json);
    for t in tensors {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Load and fully validate a checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<TensorBuffer>)> {
    let buf = fs::read(path)?;
    parse_checkpoint(&buf)
}

fn parse_checkpoint(buf: &[u8]) -> Result<(CheckpointHeader, Vec<TensorBuffer>)> {
    if buf.len() < 4 {
        return Err(Error::format(
            0,
            format!("file too short ({} bytes) for magic `MBLC`", buf.len()),
        ));
    }
    if buf[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format(
            0,
            format!(
                "bad magic: expected `MBLC`, found {:02x} {:02x} {:02x} {:02x}",
                buf[0], buf[1], buf[2], buf[3]
            ),
        ));
    }
    if buf.len() < 6 {
        return Err(Error::format(4, "file ends inside version field".to_string()));
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(
            4,
            format!("unsupported version {version}, expected {CHECKPOINT_VERSION}"),
        ));
    }
    if buf.len() < 10 {
        return Err(Error::format(6, "file ends inside header length field".to_string()));
    }
    let header_len = u32::from_le_bytes([buf[6], buf[7], buf[8], buf[9]]) as usize;
    let header_end = 10usize.checked_add(header_len).ok_or_else(|| {
        Error::format(6, format!("implausible header length {header_len}"))
    })?;
    if buf.len() < header_end {
        return Err(Error::format(
            10,
            format!(
                "header declared {header_len} bytes but only {} remain",
                buf.len() - 10
            ),
        ));
    }
    let header: CheckpointHeader = serde_json::from_slice(&buf[10..header_end])
        .map_err(|e| Error::format(10, format!("invalid header JSON: {e}")))?;

    let mut offset = header_end;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in &header.tensors {
        let count: usize = entry.shape.iter().product();
        let nbytes = count * 4;
        if buf.len() < offset + nbytes {
            return Err(Error::format(
                offset as u64,
                format!(
                    "tensor `{}` needs {nbytes} bytes, only {} remain",
                    entry.name,
                    buf.len() - offset
                ),
            ));
        }
        let mut data = Vec::with_capacity(count);
        for chunk in buf[offset..offset + nbytes].chunks_exact(4) {
            data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(
                offset as u64,
                format!("tensor `{}` contains non-finite values", entry.name),
            ));
        }
        tensors.push(TensorBuffer::from_vec(&entry.shape, data)?);
        offset += nbytes;
    }
    if offset != buf.len() {
        return Err(Error::format(
            offset as u64,
            format!("{} unexpected trailing bytes", buf.len() - offset),
        ));
    }
    Ok((header, tensors))
}

/// Tensor entries and data references for one MLP, in checkpoint order:
/// per layer `w`, `b`, then `gamma`, `beta`, `running_mean`, `running_var`
/// when batch norm is present. Names are `{prefix}.l{i}.{field}`.
pub fn mlp_tensor_entries<'a>(
    prefix: &str,
    mlp: &'a Mlp<f32>,
) -> (Vec<TensorEntry>, Vec<&'a TensorBuffer>) {
    let mut entries = Vec::new();
    let mut tensors: Vec<&TensorBuffer> = Vec::new();
    for (i, layer) in mlp.layers.iter().enumerate() {
        let mut push = |field: &str, t: &'a TensorBuffer| {
            entries.push(TensorEntry {
                name: format!("{prefix}.l{i}.{field}"),
                shape: t.shape().to_vec(),
            });
            tensors.push(t);
        };
        push("w", &layer.w);
        push("b", &layer.b);
        if let Some(bn) = &layer.bn {
            push("gamma", &bn.gamma);
            push("beta", &bn.beta);
            push("running_mean", &bn.running_mean);
            push("running_var", &bn.running_var);
        }
    }
    (entries, tensors)
}

/// Rebuild an MLP from a tensor stream produced by [`mlp_tensor_entries`].
/// Consumes exactly the tensors it needs from the front of `tensors`.
pub fn mlp_from_tensors(
    spec: &MlpSpec,
    tensors: &mut std::vec::IntoIter<TensorBuffer>,
) -> Result<Mlp<f32>> {
    let mut mlp = Mlp::<f32>::zeros(spec.clone())?;
    for (i, layer) in mlp.layers.iter_mut().enumerate() {
        let mut take = |field: &str, expected: &[usize]| -> Result<TensorBuffer> {
            let t = tensors.next().ok_or_else(|| {
                Error::Artifact(format!("checkpoint ends before layer {i} `{field}`"))
            })?;
            if t.shape() != expected {
                return Err(Error::shape(
                    format!("layer {i} `{field}`"),
                    format!("{expected:?}"),
                    format!("{:?}", t.shape()),
                ));
            }
            Ok(t)
        };
        let w_shape = layer.w.shape().to_vec();
        let b_shape = layer.b.shape().to_vec();
        layer.w = take("w", &w_shape)?;
        layer.b = take("b", &b_shape)?;
        if let Some(bn) = &mut layer.bn {
            let g_shape = bn.gamma.shape().to_vec();
            bn.gamma = take("gamma", &g_shape)?;
            bn.beta = take("beta", &g_shape)?;
            bn.running_mean = take("running_mean", &g_shape)?;
            bn.running_var = take("running_var", &g_shape)?;
        }
    }
    Ok(mlp)
}
