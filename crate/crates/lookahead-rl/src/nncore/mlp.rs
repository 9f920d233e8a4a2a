//! Multi-layer perceptrons with optional per-layer batch normalization and
//! inverted dropout.
//!
//! A layer computes `dropout(act(batchnorm(x W^T + b)))`. Weights are
//! row-major `(out, in)`. Two forward paths exist:
//!
//! * [`Mlp::infer`] — evaluation mode: batch norm uses running statistics,
//!   dropout is the identity. Pure; identical inputs give identical outputs.
//! * [`Mlp::train_forward`] — training mode: batch norm normalizes with
//!   batch statistics and updates running statistics (momentum 0.9),
//!   dropout samples a keep mask and rescales kept units by `1/(1-p)` so
//!   the expected value matches evaluation mode. Returns a cache from which
//!   [`Mlp::backward`] computes analytic gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::tensor::Tensor;
use crate::nncore::Real;

/// Epsilon inside the batch-norm variance square root.
pub const BN_EPS: f64 = 1e-5;
/// Running-statistics momentum: `running = 0.9 * running + 0.1 * batch`.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

/// Architecture description: `widths[0]` is the input dimension, each later
/// entry is a layer output width; the per-layer vectors all have length
/// `widths.len() - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub batch_norm: Vec<bool>,
    pub dropout: Vec<f32>,
}

impl MlpSpec {
    pub fn new(
        widths: Vec<usize>,
        activations: Vec<Activation>,
        batch_norm: Vec<bool>,
        dropout: Vec<f32>,
    ) -> Result<Self> {
        let spec = MlpSpec {
            widths,
            activations,
            batch_norm,
            dropout,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Plain feed-forward net: hidden layers with `hidden_act`, identity
    /// output, no batch norm, no dropout.
    pub fn plain(input: usize, hidden: &[usize], output: usize, hidden_act: Activation) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        let n = widths.len() - 1;
        let mut activations = vec![hidden_act; n];
        activations[n - 1] = Activation::Identity;
        MlpSpec {
            widths,
            activations,
            batch_norm: vec![false; n],
            dropout: vec![0.0; n],
        }
    }

    /// Regularized regression net: every hidden layer is
    /// linear -> batch norm -> ReLU -> dropout(p); the output layer is a
    /// plain linear map.
    pub fn norm_relu_dropout(input: usize, hidden: &[usize], output: usize, p: f32) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        let n = widths.len() - 1;
        let mut activations = vec![Activation::Relu; n];
        let mut batch_norm = vec![true; n];
        let mut dropout = vec![p; n];
        activations[n - 1] = Activation::Identity;
        batch_norm[n - 1] = false;
        dropout[n - 1] = 0.0;
        MlpSpec {
            widths,
            activations,
            batch_norm,
            dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::shape(
                "MlpSpec",
                "at least input and output widths",
                format!("{} widths", self.widths.len()),
            ));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::shape("MlpSpec", "all widths > 0", format!("{:?}", self.widths)));
        }
        let n = self.widths.len() - 1;
        for (name, len) in [
            ("activations", self.activations.len()),
            ("batch_norm", self.batch_norm.len()),
            ("dropout", self.dropout.len()),
        ] {
            if len != n {
                return Err(Error::shape(
                    "MlpSpec",
                    format!("{n} per-layer entries for {name}"),
                    format!("{len}"),
                ));
            }
        }
        if self.dropout.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(Error::State(format!(
                "dropout probabilities must lie in [0, 1), got {:?}",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated spec")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BatchNormParams<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer<T> {
    pub w: Tensor<T>, // (out, in)
    pub b: Tensor<T>, // (out)
    pub bn: Option<BatchNormParams<T>>,
    pub activation: Activation,
    pub dropout: f32,
}

/// A dense network instantiated from an [`MlpSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    spec: MlpSpec,
    pub(crate) layers: Vec<Layer<T>>,
}

/// Per-layer tensors recorded by a training forward pass.
struct LayerCache<T> {
    input: Tensor<T>,             // (B, in): layer input
    xhat: Option<Tensor<T>>,      // (B, out): normalized pre-scale values
    inv_std: Option<Vec<T>>,      // (out): 1 / sqrt(var + eps)
    pre_act: Tensor<T>,           // (B, out): activation input
    act_out: Tensor<T>,           // (B, out): activation output, pre-dropout
    drop_mask: Option<Tensor<T>>, // (B, out): 0 or 1/(1-p)
}

/// Cache produced by [`Mlp::train_forward`]; consumed by [`Mlp::backward`].
pub struct ForwardCache<T> {
    layers: Vec<LayerCache<T>>,
    pub output: Tensor<T>,
}

/// Gradients of the trainable parameters, mirroring [`Mlp`] layout.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub(crate) layers: Vec<LayerGrads<T>>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerGrads<T> {
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
    pub dgamma: Option<Tensor<T>>,
    pub dbeta: Option<Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(mlp: &Mlp<T>) -> Self {
        Gradients {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrads {
                    dw: Tensor::zeros(l.w.shape()),
                    db: Tensor::zeros(l.b.shape()),
                    dgamma: l.bn.as_ref().map(|bn| Tensor::zeros(bn.gamma.shape())),
                    dbeta: l.bn.as_ref().map(|bn| Tensor::zeros(bn.beta.shape())),
                })
                .collect(),
        }
    }

    /// Flat view over all gradient tensors, in the same order as
    /// [`Mlp::trainable`].
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(&l.dw);
            out.push(&l.db);
            if let Some(g) = &l.dgamma {
                out.push(g);
            }
            if let Some(b) = &l.dbeta {
                out.push(b);
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.dw);
            out.push(&mut l.db);
            if let Some(g) = &mut l.dgamma {
                out.push(g);
            }
            if let Some(b) = &mut l.dbeta {
                out.push(b);
            }
        }
        out
    }

    /// `self += scale * other`, used to accumulate minibatch contributions.
    pub fn add_scaled(&mut self, other: &Gradients<T>, scale: T) {
        let mut mine = self.tensors_mut();
        let theirs = other.tensors();
        assert_eq!(mine.len(), theirs.len(), "gradient layouts must match");
        for (m, t) in mine.iter_mut().zip(theirs) {
            for (a, b) in m.data_mut().iter_mut().zip(t.data()) {
                *a = b.mul_add(scale, *a);
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            for v in t.data_mut() {
                *v = *v * factor;
            }
        }
    }
}

fn check_finite<T: Real>(x: &Tensor<T>, context: &str) -> Result<()> {
    if x.all_finite() {
        Ok(())
    } else {
        Err(Error::non_finite(context))
    }
}

impl<T: Real> Mlp<T> {
    /// Zero-initialized network (used when loading from a checkpoint).
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layers = (0..spec.num_layers())
            .map(|i| {
                let (fan_in, fan_out) = (spec.widths[i], spec.widths[i + 1]);
                Layer {
                    w: Tensor::zeros(&[fan_out, fan_in]),
                    b: Tensor::zeros(&[fan_out]),
                    bn: spec.batch_norm[i].then(|| BatchNormParams {
                        gamma: Tensor::zeros(&[fan_out]),
                        beta: Tensor::zeros(&[fan_out]),
                        running_mean: Tensor::zeros(&[fan_out]),
                        running_var: Tensor::zeros(&[fan_out]),
                    }),
                    activation: spec.activations[i],
                    dropout: spec.dropout[i],
                }
            })
            .collect();
        Ok(Mlp { spec, layers })
    }

    /// Initialize weights uniformly in `±sqrt(6 / (fan_in + fan_out))`,
    /// biases to zero, batch-norm scale to one and shift to zero, running
    /// mean/variance to zero/one. Weight elements are drawn in row-major
    /// order, layer by layer.
    pub fn init(spec: MlpSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut mlp = Mlp::zeros(spec)?;
        for layer in &mut mlp.layers {
            let fan_out = layer.w.shape()[0];
            let fan_in = layer.w.shape()[1];
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in layer.w.data_mut() {
                let u: f64 = rng.gen();
                *w = T::of_f64(limit * (2.0 * u - 1.0));
            }
            if let Some(bn) = &mut layer.bn {
                bn.gamma.fill(T::one());
                bn.running_var.fill(T::one());
            }
        }
        Ok(mlp)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.trainable().iter().map(|t| t.len()).sum()
    }

    /// Trainable tensors in checkpoint order:
    /// per layer `w, b`, then `gamma, beta` when batch norm is present.
    pub fn trainable(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(&l.w);
            out.push(&l.b);
            if let Some(bn) = &l.bn {
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.w);
            out.push(&mut l.b);
            if let Some(bn) = &mut l.bn {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out
    }

    /// Re-instantiate with a different scalar type (values converted through
    /// `f64`, exact for `f32` sources).
    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            spec: self.spec.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    w: l.w.cast(),
                    b: l.b.cast(),
                    bn: l.bn.as_ref().map(|bn| BatchNormParams {
                        gamma: bn.gamma.cast(),
                        beta: bn.beta.cast(),
                        running_mean: bn.running_mean.cast(),
                        running_var: bn.running_var.cast(),
                    }),
                    activation: l.activation,
                    dropout: l.dropout,
                })
                .collect(),
        }
    }

    fn check_input(&self, input: &Tensor<T>, context: &str) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::shape(
                context,
                format!("{} input columns", self.input_dim()),
                format!("{}", input.cols()),
            ));
        }
        check_finite(input, context)
    }

    /// Evaluation-mode forward: running statistics for batch norm, no
    /// dropout. Pure function of (parameters, input).
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input, "Mlp::infer")?;
        let batch = input.rows();
        let mut x = input.clone();
        for layer in &self.layers {
            let out_dim = layer.w.shape()[0];
            let mut z = Tensor::matrix(batch, out_dim);
            linear_forward(&x, &layer.w, &layer.b, &mut z);
            if let Some(bn) = &layer.bn {
                let eps = T::of_f64(BN_EPS);
                let inv: Vec<T> = (0..out_dim)
                    .map(|j| (bn.running_var.data()[j] + eps).sqrt().recip())
                    .collect();
                for r in 0..batch {
                    let row = z.row_mut(r);
                    for j in 0..out_dim {
                        let xh = (row[j] - bn.running_mean.data()[j]) * inv[j];
                        row[j] = xh.mul_add(bn.gamma.data()[j], bn.beta.data()[j]);
                    }
                }
            }
            apply_activation(layer.activation, &mut z);
            x = z;
        }
        Ok(x)
    }

    /// Training-mode forward. Updates batch-norm running statistics (a
    /// deliberate side effect of training) and consumes `rng` for dropout
    /// masks: one uniform draw per element of each dropout layer's output,
    /// row-major, layers in order — and no draws for layers with `p = 0`.
    pub fn train_forward(&mut self, input: &Tensor<T>, rng: &mut ChaCha8Rng) -> Result<ForwardCache<T>> {
        self.check_input(input, "Mlp::train_forward")?;
        let batch = input.rows();
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &mut self.layers {
            let out_dim = layer.w.shape()[0];
            let mut z = Tensor::matrix(batch, out_dim);
            linear_forward(&x, &layer.w, &layer.b, &mut z);

            let (xhat, inv_std) = if let Some(bn) = &mut layer.bn {
                let eps = T::of_f64(BN_EPS);
                let n = T::of_f64(batch as f64);
                let mut inv_std = vec![T::zero(); out_dim];
                let mut xhat = Tensor::matrix(batch, out_dim);
                for j in 0..out_dim {
                    let mut mean = T::zero();
                    for r in 0..batch {
                        mean = mean + z.data()[r * out_dim + j];
                    }
                    mean = mean / n;
                    let mut var = T::zero();
                    for r in 0..batch {
                        let d = z.data()[r * out_dim + j] - mean;
                        var = d.mul_add(d, var);
                    }
                    var = var / n; // biased variance for normalization
                    let inv = (var + eps).sqrt().recip();
                    inv_std[j] = inv;
                    for r in 0..batch {
                        let xh = (z.data()[r * out_dim + j] - mean) * inv;
                        xhat.data_mut()[r * out_dim + j] = xh;
                        z.data_mut()[r * out_dim + j] =
                            xh.mul_add(bn.gamma.data()[j], bn.beta.data()[j]);
                    }
                    // Running stats track the unbiased batch variance.
                    let run_var = if batch > 1 {
                        var * n / T::of_f64((batch - 1) as f64)
                    } else {
                        var
                    };
                    let mom = T::of_f64(BN_MOMENTUM);
                    let one_m = T::one() - mom;
                    bn.running_mean.data_mut()[j] =
                        mom.mul_add(bn.running_mean.data()[j], one_m * mean);
                    bn.running_var.data_mut()[j] =
                        mom.mul_add(bn.running_var.data()[j], one_m * run_var);
                }
                (Some(xhat), Some(inv_std))
            } else {
                (None, None)
            };

            let pre_act = z.clone();
            apply_activation(layer.activation, &mut z);
            let act_out = z.clone();

            let drop_mask = if layer.dropout > 0.0 {
                let p = layer.dropout as f64;
                let scale = T::of_f64(1.0 / (1.0 - p));
                let mut mask = Tensor::matrix(batch, out_dim);
                for (m, v) in mask.data_mut().iter_mut().zip(z.data_mut()) {
                    let u: f64 = rng.gen();
                    if u < p {
                        *m = T::zero();
                        *v = T::zero();
                    } else {
                        *m = scale;
                        *v = *v * scale;
                    }
                }
                Some(mask)
            } else {
                None
            };

            caches.push(LayerCache {
                input: x,
                xhat,
                inv_std,
                pre_act,
                act_out,
                drop_mask,
            });
            x = z;
        }
        Ok(ForwardCache {
            layers: caches,
            output: x,
        })
    }

    /// Backward pass from a training-forward cache. Returns parameter
    /// gradients and the gradient with respect to the network input.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_out: &Tensor<T>) -> Result<(Gradients<T>, Tensor<T>)> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::State(
                "forward cache does not match network depth".into(),
            ));
        }
        if grad_out.rows() != cache.output.rows() || grad_out.cols() != cache.output.cols() {
            return Err(Error::shape(
                "Mlp::backward",
                format!("{}x{}", cache.output.rows(), cache.output.cols()),
                format!("{}x{}", grad_out.rows(), grad_out.cols()),
            ));
        }
        let batch = grad_out.rows();
        let mut grads = Gradients::zeros_like(self);
        let mut g = grad_out.clone();

        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let lc = &cache.layers[idx];
            let out_dim = layer.w.shape()[0];
            let in_dim = layer.w.shape()[1];

            if let Some(mask) = &lc.drop_mask {
                for (gv, m) in g.data_mut().iter_mut().zip(mask.data()) {
                    *gv = *gv * *m;
                }
            }

            match layer.activation {
                Activation::Identity => {}
                Activation::Relu => {
                    for (gv, z) in g.data_mut().iter_mut().zip(lc.pre_act.data()) {
                        if *z <= T::zero() {
                            *gv = T::zero();
                        }
                    }
                }
                Activation::Tanh => {
                    for (gv, y) in g.data_mut().iter_mut().zip(lc.act_out.data()) {
                        *gv = *gv * (T::one() - *y * *y);
                    }
                }
            }

            if let Some(bn) = &layer.bn {
                let xhat = lc.xhat.as_ref().expect("bn cache");
                let inv_std = lc.inv_std.as_ref().expect("bn cache");
                let lg = &mut grads.layers[idx];
                let dgamma = lg.dgamma.as_mut().expect("bn grads");
                let dbeta = lg.dbeta.as_mut().expect("bn grads");
                let n = T::of_f64(batch as f64);
                for j in 0..out_dim {
                    let mut sum_dy = T::zero();
                    let mut sum_dy_xhat = T::zero();
                    for r in 0..batch {
                        let dy = g.data()[r * out_dim + j];
                        sum_dy = sum_dy + dy;
                        sum_dy_xhat = dy.mul_add(xhat.data()[r * out_dim + j], sum_dy_xhat);
                    }
                    dbeta.data_mut()[j] = sum_dy;
                    dgamma.data_mut()[j] = sum_dy_xhat;
                    let gamma = bn.gamma.data()[j];
                    let scale = gamma * inv_std[j] / n;
                    for r in 0..batch {
                        let dy = g.data()[r * out_dim + j];
                        let xh = xhat.data()[r * out_dim + j];
                        g.data_mut()[r * out_dim + j] =
                            scale * (n * dy - sum_dy - xh * sum_dy_xhat);
                    }
                }
            }

            // Linear: dW = g^T x, db = column sums of g, dx = g W.
            let lg = &mut grads.layers[idx];
            let mut dx = Tensor::matrix(batch, in_dim);
            for r in 0..batch {
                let g_row = g.row(r);
                let x_row = lc.input.row(r);
                let dx_row = dx.row_mut(r);
                for o in 0..out_dim {
                    let go = g_row[o];
                    lg.db.data_mut()[o] = lg.db.data()[o] + go;
                    let dw_row = &mut lg.dw.data_mut()[o * in_dim..(o + 1) * in_dim];
                    for (dw, xv) in dw_row.iter_mut().zip(x_row) {
                        *dw = go.mul_add(*xv, *dw);
                    }
                    let w_row = &layer.w.data()[o * in_dim..(o + 1) * in_dim];
                    for (dxv, wv) in dx_row.iter_mut().zip(w_row) {
                        *dxv = go.mul_add(*wv, *dxv);
                    }
                }
            }
            g = dx;
        }
        Ok((grads, g))
    }
}

fn linear_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>, out: &mut Tensor<T>) {
    let batch = x.rows();
    let in_dim = w.shape()[1];
    let out_dim = w.shape()[0];
    debug_assert_eq!(x.cols(), in_dim);
    // Column-major scratch copy of the weights so the inner loop walks
    // contiguous output lanes: the fused chains per output unit keep the
    // exact operation order of a per-output dot product while the compiler
    // packs independent lanes into SIMD registers.
    let mut wt = vec![T::zero(); in_dim * out_dim];
    for o in 0..out_dim {
        for i in 0..in_dim {
            wt[i * out_dim + o] = w.data()[o * in_dim + i];
        }
    }
    let mut acc = vec![T::zero(); out_dim];
    for r in 0..batch {
        let x_row = x.row(r);
        acc.iter_mut().for_each(|a| *a = T::zero());
        for (i, &xi) in x_row.iter().enumerate() {
            let w_col = &wt[i * out_dim..(i + 1) * out_dim];
            for (a, &wv) in acc.iter_mut().zip(w_col) {
                *a = xi.mul_add(wv, *a);
            }
        }
        for (dst, (&a, &bias)) in out.row_mut(r).iter_mut().zip(acc.iter().zip(b.data())) {
            *dst = bias + a;
        }
    }
}

fn apply_activation<T: Real>(act: Activation, z: &mut Tensor<T>) {
    match act {
        Activation::Identity => {}
        Activation::Relu => {
            for v in z.data_mut() {
                if *v < T::zero() {
                    *v = T::zero();
                }
            }
        }
        Activation::Tanh => {
            for v in z.data_mut() {
                *v = v.tanh();
            }
        }
    }
}
