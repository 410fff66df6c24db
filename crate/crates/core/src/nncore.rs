//! Dense MLP projector with hand-derived forward/backward passes, Kaiming
//! initialization and a bias-corrected Adam optimizer.
//!
//! Everything is 64-bit internally. All functions are pure with respect to
//! their inputs; determinism is guaranteed given a seed.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
    SiLU,
}

impl Activation {
    /// Returns `(value, derivative)` at `x`.
    ///
    /// The ReLU derivative at exactly 0 is defined as 0. SiLU is
    /// `x * sigmoid(x)` with derivative `sigmoid(x) * (1 + x * (1 - sigmoid(x)))`.
    pub fn eval(self, x: f64) -> (f64, f64) {
        match self {
            Activation::ReLU => {
                if x > 0.0 {
                    (x, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Activation::SiLU => {
                let s = 1.0 / (1.0 + (-x).exp());
                (x * s, s * (1.0 + x * (1.0 - s)))
            }
        }
    }
}

/// Multilayer perceptron mapping `layer_dims[0]`-dimensional inputs to
/// `layer_dims.last()`-dimensional outputs. Hidden layers share one
/// activation; the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layer_dims: Vec<usize>,
    /// Per-layer weight matrices, shape (out, in).
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub activation: Activation,
}

/// A per-training-point coordinate table standing in for the network, so the
/// trainer can mimic non-parametric behaviour. Rows are embedding
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    pub table: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projector {
    Mlp(Mlp),
    Lookup(LookupTable),
}

impl Projector {
    pub fn input_dim(&self) -> usize {
        match self {
            Projector::Mlp(m) => m.layer_dims[0],
            Projector::Lookup(t) => t.table.ncols(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Projector::Mlp(m) => *m.layer_dims.last().unwrap(),
            Projector::Lookup(t) => t.table.ncols(),
        }
    }
}

/// Per-layer activations recorded by a forward pass, consumed by `backward`.
pub struct ForwardCache {
    /// `post[0]` is the input batch; `post[i]` the activated output of
    /// layer i-1 for hidden layers, linear output for the last layer.
    pub post: Vec<Array2<f64>>,
    /// Pre-activation derivative of each hidden layer, same shape as the
    /// corresponding `post`.
    pub act_deriv: Vec<Array2<f64>>,
}

/// Gradients of a scalar loss with respect to every MLP parameter.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            weights: mlp.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: mlp.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            *w *= s;
        }
        for b in &mut self.biases {
            *b *= s;
        }
    }
}

/// Draws each weight i.i.d. from N(0, 2 / fan_in); biases start at zero.
pub fn kaiming_init(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Mlp> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidArgument(
            "layer_dims needs at least an input and an output dimension".into(),
        ));
    }
    if layer_dims.contains(&0) {
        return Err(Error::InvalidArgument("zero layer dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for win in layer_dims.windows(2) {
        let (fan_in, fan_out) = (win[0], win[1]);
        let std = (2.0 / fan_in as f64).sqrt();
        let w = Array2::from_shape_fn((fan_out, fan_in), |_| std * sample_standard_normal(&mut rng));
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    Ok(Mlp {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
        activation,
    })
}

// Box-Muller; two uniforms per draw keeps the stream layout obvious.
fn sample_standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl Mlp {
    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Forward pass over a batch (rows are samples).
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: batch.ncols(),
                context: "forward input width".into(),
            });
        }
        let n_layers = self.weights.len();
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(n_layers + 1);
        let mut act_deriv: Vec<Array2<f64>> = Vec::with_capacity(n_layers.saturating_sub(1));
        post.push(batch.to_owned());
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = post[i].dot(&w.t());
            z += &b.view().insert_axis(Axis(0));
            if i + 1 < n_layers {
                let mut deriv = Array2::zeros(z.dim());
                ndarray::Zip::from(&mut z).and(&mut deriv).for_each(|v, d| {
                    let (val, der) = self.activation.eval(*v);
                    *v = val;
                    *d = der;
                });
                act_deriv.push(deriv);
            }
            post.push(z);
        }
        let y = post.last().unwrap().clone();
        Ok((y, ForwardCache { post, act_deriv }))
    }

    /// Exact reverse-mode gradients of the composition for a loss with
    /// output-gradient `dl_dy`.
    pub fn backward(&self, cache: &ForwardCache, dl_dy: ArrayView2<f64>) -> Result<Gradients> {
        let n_layers = self.weights.len();
        let out = cache.post.last().unwrap();
        if dl_dy.dim() != out.dim() {
            return Err(Error::DimensionMismatch {
                expected: out.ncols(),
                got: dl_dy.ncols(),
                context: "backward output-gradient shape".into(),
            });
        }
        let mut grads = Gradients {
            weights: Vec::with_capacity(n_layers),
            biases: Vec::with_capacity(n_layers),
        };
        let mut delta = dl_dy.to_owned();
        for i in (0..n_layers).rev() {
            grads.weights.push(delta.t().dot(&cache.post[i]));
            grads.biases.push(delta.sum_axis(Axis(0)));
            if i > 0 {
                delta = delta.dot(&self.weights[i]);
                delta *= &cache.act_deriv[i - 1];
            }
        }
        grads.weights.reverse();
        grads.biases.reverse();
        Ok(grads)
    }
}

/// Bias-corrected Adam state over one MLP's parameter set.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m_weights: Vec<Array2<f64>>,
    pub m_biases: Vec<Array1<f64>>,
    pub v_weights: Vec<Array2<f64>>,
    pub v_biases: Vec<Array1<f64>>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(mlp: &Mlp, learning_rate: f64) -> Self {
        let g = Gradients::zeros_like(mlp);
        AdamState {
            m_weights: g.weights.clone(),
            m_biases: g.biases.clone(),
            v_weights: g.weights,
            v_biases: g.biases,
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
        }
    }
}

/// One Adam update in place. Errors on non-finite gradient entries.
pub fn adam_step(mlp: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    for g in &grads.weights {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weight gradient".into()));
        }
    }
    for g in &grads.biases {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("bias gradient".into()));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.epsilon, state.learning_rate);
    for i in 0..mlp.weights.len() {
        adam_update(
            mlp.weights[i].as_slice_mut().unwrap(),
            grads.weights[i].as_slice().unwrap(),
            state.m_weights[i].as_slice_mut().unwrap(),
            state.v_weights[i].as_slice_mut().unwrap(),
            b1, b2, eps, lr, bc1, bc2,
        );
        adam_update(
            mlp.biases[i].as_slice_mut().unwrap(),
            grads.biases[i].as_slice().unwrap(),
            state.m_biases[i].as_slice_mut().unwrap(),
            state.v_biases[i].as_slice_mut().unwrap(),
            b1, b2, eps, lr, bc1, bc2,
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    b1: f64,
    b2: f64,
    eps: f64,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}
