//! Input normalization: running (Welford) statistics accumulated during
//! data collection, frozen into checkpoints as mean/std vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum standard deviation; features with less spread are treated as
/// constant rather than amplified.
pub const STD_FLOOR: f32 = 1e-6;

/// Frozen per-feature normalization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl NormStats {
    /// Identity transform of the given width.
    pub fn identity(dim: usize) -> Self {
        NormStats {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population statistics of a set of rows (used for dataset-level
    /// normalization where all data is available at once).
    pub fn from_rows<'a>(rows: impl Iterator<Item = &'a [f32]> + Clone, dim: usize) -> Self {
        let mut mean = vec![0.0f64; dim];
        let mut count = 0u64;
        for row in rows.clone() {
            assert_eq!(row.len(), dim, "row width mismatch");
            for (m, v) in mean.iter_mut().zip(row) {
                *m += *v as f64;
            }
            count += 1;
        }
        if count > 0 {
            for m in &mut mean {
                *m /= count as f64;
            }
        }
        let mut var = vec![0.0f64; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = *v as f64 - *m;
                *s += d * d;
            }
        }
        let std = var
            .iter()
            .map(|s| {
                let v = if count > 0 { s / count as f64 } else { 0.0 };
                (v.sqrt() as f32).max(STD_FLOOR)
            })
            .collect();
        NormStats {
            mean: mean.iter().map(|m| *m as f32).collect(),
            std,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self, dim: usize, context: &str) -> Result<()> {
        if self.mean.len() != dim || self.std.len() != dim {
            return Err(Error::shape(
                context,
                format!("normalization dim {dim}"),
                format!("mean {} / std {}", self.mean.len(), self.std.len()),
            ));
        }
        if self
            .mean
            .iter()
            .chain(self.std.iter())
            .any(|v| !v.is_finite())
            || self.std.iter().any(|s| *s <= 0.0)
        {
            return Err(Error::non_finite(context));
        }
        Ok(())
    }

    pub fn normalize(&self, x: &mut [f32]) {
        debug_assert_eq!(x.len(), self.mean.len());
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn denormalize(&self, x: &mut [f32]) {
        debug_assert_eq!(x.len(), self.mean.len());
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = v.mul_add(*s, *m);
        }
    }
}

/// Streaming per-feature mean/variance (Welford's algorithm, `f64`
/// accumulators).
#[derive(Debug, Clone)]
pub struct RunningNorm {
    mean: Vec<f64>,
    m2: Vec<f64>,
    count: u64,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        RunningNorm {
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn update(&mut self, x: &[f32]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, m2), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let v = *v as f64;
            let delta = v - *m;
            *m += delta / n;
            *m2 += delta * (v - *m);
        }
    }

    /// Freeze into mean/std (population variance, floored std). With fewer
    /// than two samples the transform is the identity.
    pub fn stats(&self) -> NormStats {
        if self.count < 2 {
            return NormStats::identity(self.mean.len());
        }
        let n = self.count as f64;
        NormStats {
            mean: self.mean.iter().map(|m| *m as f32).collect(),
            std: self
                .m2
                .iter()
                .map(|m2| (((m2 / n).sqrt()) as f32).max(STD_FLOOR))
                .collect(),
        }
    }
}
