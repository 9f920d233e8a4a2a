//! Minimal dense-network engine.
//!
//! Everything the rest of the crate needs from a deep-learning library,
//! and nothing more: row-major tensors, MLPs with optional batch
//! normalization and inverted dropout, a diagonal-Gaussian policy head,
//! Adam, running input normalization, and a binary checkpoint format.
//!
//! The engine is generic over the scalar type. Production code runs in
//! `f32`; tests instantiate the same networks in `f64` to validate analytic
//! gradients against central finite differences at tight tolerances.

mod adam;
mod checkpoint;
mod gaussian;
mod mlp;
mod norm;
mod tensor;

pub use adam::{clip_global_norm, global_grad_norm, Adam, AdamConfig};
pub use checkpoint::{
    load_checkpoint, mlp_from_tensors, mlp_tensor_entries, save_checkpoint, CheckpointHeader,
    CheckpointMeta, TensorEntry, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use gaussian::{
    gaussian_entropy, gaussian_log_prob, gaussian_sample, GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN,
};
pub use mlp::{Activation, ForwardCache, Gradients, Mlp, MlpSpec, BN_EPS, BN_MOMENTUM};
pub use norm::{NormStats, RunningNorm};
pub use tensor::{Tensor, TensorBuffer};

/// Scalar abstraction: `f32` at runtime, `f64` for high-precision gradient
/// checks. Conversions through `f64` are exact for every `f32` value.
pub trait Real:
    num_traits::Float + std::fmt::Debug + Default + Send + Sync + 'static
{
    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of_f64(v: f64) -> f32 {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of_f64(v: f64) -> f64 {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}
