//! A small dense feedforward network trained from scratch: Glorot-normal
//! initialization, hand-written backpropagation for the mean squared error,
//! and minibatch Adam. Everything is driven by explicit seeds so a spec and
//! a dataset fully determine the trained parameters.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::stream_rng;

/// Hidden-layer activation functions. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Logistic,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Logistic => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Architecture and training configuration of a dense network.
///
/// `layer_sizes` runs from the input width to the output width, e.g.
/// (10, 8, 8, 1); `activations` has one entry per hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub init_seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl NetSpec {
    /// Spec with one activation per hidden layer and the conventional Adam
    /// settings (learning rate 0.001, batch 32, 200 epochs).
    pub fn new(layer_sizes: Vec<usize>, hidden_activation: Activation, init_seed: u64) -> Self {
        let hidden = layer_sizes.len().saturating_sub(2);
        NetSpec {
            layer_sizes,
            activations: vec![hidden_activation; hidden],
            init_seed,
            learning_rate: 0.001,
            batch_size: 32,
            epochs: 200,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig(
                "need at least input and output layers, all nonempty".into(),
            ));
        }
        if self.activations.len() != self.layer_sizes.len() - 2 {
            return Err(Error::InvalidConfig(format!(
                "expected {} hidden activations, got {}",
                self.layer_sizes.len() - 2,
                self.activations.len()
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "learning rate must be positive and batch size nonzero".into(),
            ));
        }
        Ok(())
    }

    /// Total number of weights and biases.
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// (weights offset, bias offset, rows, cols) of layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize, usize, usize) {
        let mut offset = 0;
        for i in 0..l {
            offset += (self.layer_sizes[i] + 1) * self.layer_sizes[i + 1];
        }
        let rows = self.layer_sizes[l + 1];
        let cols = self.layer_sizes[l];
        (offset, offset + rows * cols, rows, cols)
    }

    fn activation_of(&self, l: usize) -> Activation {
        if l + 1 == self.num_layers() {
            Activation::Linear
        } else {
            self.activations[l]
        }
    }

    /// Restrict the input layer to the kept feature columns; the rest of the
    /// architecture is unchanged.
    pub fn keep_features(&self, kept: &[usize]) -> Result<NetSpec> {
        check_kept(kept, self.input_width())?;
        let mut spec = self.clone();
        spec.layer_sizes[0] = kept.len();
        Ok(spec)
    }

    pub fn label(&self) -> String {
        let arch: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        format!("net_{}", arch.join("-"))
    }
}

fn check_kept(kept: &[usize], width: usize) -> Result<()> {
    if kept.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    if kept.iter().any(|&i| i >= width) {
        return Err(Error::InvalidConfig(format!(
            "feature index out of range (width {width})"
        )));
    }
    if kept.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "kept feature indices must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Drop input columns from a flat parameter vector: the first-layer weight
/// matrix loses the dropped columns, everything else is copied through.
pub(crate) fn keep_feature_params(
    spec: &NetSpec,
    params: &[f64],
    kept: &[usize],
) -> Result<Vec<f64>> {
    check_kept(kept, spec.input_width())?;
    let (w0, b0, rows, cols) = spec.layer_offsets(0);
    debug_assert_eq!(w0, 0);
    let mut out = Vec::with_capacity(params.len());
    for r in 0..rows {
        for &c in kept {
            out.push(params[r * cols + c]);
        }
    }
    out.extend_from_slice(&params[b0..]);
    Ok(out)
}

const STREAM_INIT: u64 = 0;
const STREAM_EPOCH_BASE: u64 = 1;

/// Glorot-normal initial parameters: each weight of a layer is drawn from
/// N(0, 2 / (fan_in + fan_out)), biases start at zero. Fully determined by
/// `spec.init_seed`.
pub fn glorot_normal_init(spec: &NetSpec) -> Vec<f64> {
    let mut rng = stream_rng(spec.init_seed, STREAM_INIT);
    let mut params = vec![0.0; spec.param_count()];
    for l in 0..spec.num_layers() {
        let (w_off, _, rows, cols) = spec.layer_offsets(l);
        let sd = (2.0 / (cols + rows) as f64).sqrt();
        for w in params[w_off..w_off + rows * cols].iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = sd * z;
        }
    }
    params
}

/// Forward pass for a single input row.
pub fn net_forward(spec: &NetSpec, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != spec.input_width() {
        return Err(Error::DimensionMismatch {
            expected: spec.input_width(),
            actual: input.len(),
        });
    }
    if params.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.param_count(),
            actual: params.len(),
        });
    }
    let mut activation = input.to_vec();
    for l in 0..spec.num_layers() {
        let (w_off, b_off, rows, cols) = spec.layer_offsets(l);
        let g = spec.activation_of(l);
        let mut next = vec![0.0; rows];
        for r in 0..rows {
            let row = &params[w_off + r * cols..w_off + (r + 1) * cols];
            let mut z = params[b_off + r];
            for (w, a) in row.iter().zip(&activation) {
                z += w * a;
            }
            next[r] = g.apply(z);
        }
        activation = next;
    }
    Ok(activation)
}

/// Gradient of the batch mean squared error with respect to every parameter.
/// The network must have a single output.
pub fn net_gradients(
    spec: &NetSpec,
    params: &[f64],
    batch_x: &[Vec<f64>],
    batch_y: &[f64],
) -> Result<Vec<f64>> {
    if batch_x.is_empty() || batch_x.len() != batch_y.len() {
        return Err(Error::LengthMismatch {
            left: batch_x.len(),
            right: batch_y.len(),
        });
    }
    if spec.output_width() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: spec.output_width(),
        });
    }
    let layers = spec.num_layers();
    let mut grads = vec![0.0; spec.param_count()];
    let batch_weight = 1.0 / batch_x.len() as f64;

    for (input, &target) in batch_x.iter().zip(batch_y) {
        if input.len() != spec.input_width() {
            return Err(Error::DimensionMismatch {
                expected: spec.input_width(),
                actual: input.len(),
            });
        }
        // Forward, keeping pre-activations and activations per layer.
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(layers);
        acts.push(input.clone());
        for l in 0..layers {
            let (w_off, b_off, rows, cols) = spec.layer_offsets(l);
            let g = spec.activation_of(l);
            let mut z = vec![0.0; rows];
            for r in 0..rows {
                let row = &params[w_off + r * cols..w_off + (r + 1) * cols];
                let mut acc = params[b_off + r];
                for (w, a) in row.iter().zip(&acts[l]) {
                    acc += w * a;
                }
                z[r] = acc;
            }
            let a = z.iter().map(|&v| g.apply(v)).collect();
            pre.push(z);
            acts.push(a);
        }
        // Backward: d(loss)/dz, starting from the linear output unit.
        let prediction = acts[layers][0];
        let mut delta = vec![2.0 * (prediction - target) * batch_weight];
        for l in (0..layers).rev() {
            let (w_off, b_off, rows, cols) = spec.layer_offsets(l);
            for r in 0..rows {
                let d = delta[r];
                grads[b_off + r] += d;
                let grad_row = &mut grads[w_off + r * cols..w_off + (r + 1) * cols];
                for (g_entry, a) in grad_row.iter_mut().zip(&acts[l]) {
                    *g_entry += d * a;
                }
            }
            if l > 0 {
                let g_prev = spec.activation_of(l - 1);
                let mut prev = vec![0.0; cols];
                for r in 0..rows {
                    let d = delta[r];
                    let row = &params[w_off + r * cols..w_off + (r + 1) * cols];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                for (p, z) in prev.iter_mut().zip(&pre[l - 1]) {
                    *p *= g_prev.derivative(*z);
                }
                delta = prev;
            }
        }
    }
    Ok(grads)
}

/// First and second moment accumulators for Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn zeros(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One bias-corrected Adam update; `t` counts steps from 1.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    t: usize,
    spec: &NetSpec,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            actual: grads.len(),
        });
    }
    let b1 = spec.adam_beta1;
    let b2 = spec.adam_beta2;
    let bias1 = 1.0 - b1.powi(t as i32);
    let bias2 = 1.0 - b2.powi(t as i32);
    for i in 0..params.len() {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        params[i] -= spec.learning_rate * m_hat / (v_hat.sqrt() + spec.adam_eps);
    }
    Ok(())
}

fn mse(spec: &NetSpec, params: &[f64], x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (row, &target) in x.iter().zip(y) {
        let pred = net_forward(spec, params, row)?[0];
        let e = pred - target;
        acc += e * e;
    }
    Ok(acc / x.len() as f64)
}

/// Minibatch Adam training. Epoch `e` shuffles the row order with an RNG
/// derived from (init_seed, e), so two runs with the same spec and data are
/// bit-identical. The loss history holds the full-data MSE after each epoch.
pub fn train_net(x: &[Vec<f64>], y: &[f64], spec: &NetSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < spec.batch_size {
        return Err(Error::SampleTooSmall {
            n: x.len(),
            min: spec.batch_size,
        });
    }
    if spec.output_width() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: spec.output_width(),
        });
    }
    let mut params = glorot_normal_init(spec);
    let mut state = AdamState::zeros(params.len());
    let mut history = Vec::with_capacity(spec.epochs);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut step = 0;
    for epoch in 0..spec.epochs {
        let mut rng = stream_rng(spec.init_seed, STREAM_EPOCH_BASE + epoch as u64);
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(spec.batch_size) {
            let batch_x: Vec<Vec<f64>> = chunk.iter().map(|&i| x[i].clone()).collect();
            let batch_y: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
            let grads = net_gradients(spec, &params, &batch_x, &batch_y)?;
            step += 1;
            adam_step(&mut params, &grads, &mut state, step, spec)?;
        }
        let loss = mse(spec, &params, x, y)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(loss);
    }
    Ok((params, history))
}
