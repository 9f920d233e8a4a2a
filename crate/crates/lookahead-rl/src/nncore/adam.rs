//! Adam optimizer with bias correction, plus global gradient-norm clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::tensor::Tensor;
use crate::nncore::Real;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam state for one fixed list of parameter tensors. The shapes are bound
/// at construction; every step must present matching gradients.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    step_count: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(cfg: AdamConfig, shapes: &[&[usize]]) -> Self {
        Adam {
            cfg,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            step_count: 0,
        }
    }

    /// Convenience constructor from the parameter tensors themselves.
    pub fn for_params(cfg: AdamConfig, params: &[&Tensor<T>]) -> Self {
        let shapes: Vec<&[usize]> = params.iter().map(|p| p.shape()).collect();
        Adam::new(cfg, &shapes)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    /// One update: `m/v` moments, bias correction by the incremented step
    /// count, then `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    ///
    /// Any non-finite gradient aborts the update with parameters, moments,
    /// and step count all unchanged.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[&Tensor<T>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Optimizer(format!(
                "expected {} tensors, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != self.m[i].shape() || g.shape() != self.m[i].shape() {
                return Err(Error::Optimizer(format!(
                    "tensor {i} shape mismatch: state {:?}, param {:?}, grad {:?}",
                    self.m[i].shape(),
                    p.shape(),
                    g.shape()
                )));
            }
            if !g.all_finite() {
                return Err(Error::Optimizer(format!(
                    "non-finite gradient in tensor {i}; parameters left unchanged"
                )));
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let b1 = T::of_f64(self.cfg.beta1);
        let b2 = T::of_f64(self.cfg.beta2);
        let one = T::one();
        let lr = T::of_f64(self.cfg.learning_rate);
        let eps = T::of_f64(self.cfg.eps);
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for ((pv, gv), (mv, vv)) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
            {
                *mv = b1.mul_add(*mv, (one - b1) * *gv);
                *vv = b2.mul_add(*vv, (one - b2) * *gv * *gv);
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv = *pv - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// L2 norm over all elements of all tensors.
pub fn global_grad_norm<T: Real>(tensors: &[&Tensor<T>]) -> f64 {
    let mut acc = 0.0f64;
    for t in tensors {
        for v in t.data() {
            let x = v.as_f64();
            acc += x * x;
        }
    }
    acc.sqrt()
}

/// Scale all tensors by `max_norm / norm` when the global norm exceeds
/// `max_norm`. Returns the pre-clip norm.
pub fn clip_global_norm<T: Real>(tensors: &mut [&mut Tensor<T>], max_norm: f64) -> f64 {
    let refs: Vec<&Tensor<T>> = tensors.iter().map(|t| &**t).collect();
    let norm = global_grad_norm(&refs);
    if norm > max_norm && norm > 0.0 {
        let scale = T::of_f64(max_norm / norm);
        for t in tensors.iter_mut() {
            for v in t.data_mut() {
                *v = *v * scale;
            }
        }
    }
    norm
}
