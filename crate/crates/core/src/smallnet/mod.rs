//! Minimal dense feed-forward network with exact per-example gradients.
//!
//! Parameters live in one flat `f64` buffer. Layer `l` occupies
//! `out_l * in_l` weights in row-major `(out, in)` order followed by `out_l`
//! biases. Hidden layers apply the configured activation; the output layer is
//! affine. A [`Head::Gaussian`] net emits `(mu, log_sigma)`.

mod grads;
mod loss;

pub use grads::{clip_per_example, sgd_step, PerExampleGrads};
pub use loss::{cross_entropy, gaussian_nll, gaussian_nll_log_sigma, margin_score};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, AuditError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    #[inline]
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
        }
    }
}

/// What the final layer's outputs mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Unnormalized class scores.
    Logits,
    /// `(mu, log_sigma)` of a Gaussian over a scalar target.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    CrossEntropy,
    GaussianNll,
}

impl Loss {
    pub fn for_head(head: Head) -> Loss {
        match head {
            Head::Logits => Loss::CrossEntropy,
            Head::Gaussian => Loss::GaussianNll,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub head: Head,
}

impl NetConfig {
    pub fn classifier(input_dim: usize, hidden_dims: Vec<usize>, num_classes: usize) -> Self {
        Self {
            input_dim,
            hidden_dims,
            output_dim: num_classes,
            activation: Activation::Relu,
            head: Head::Logits,
        }
    }

    pub fn gaussian_regressor(input_dim: usize, hidden_dims: Vec<usize>) -> Self {
        Self {
            input_dim,
            hidden_dims,
            output_dim: 2,
            activation: Activation::Tanh,
            head: Head::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return config_err(format!("all layer dimensions must be >= 1, got {self:?}"));
        }
        if self.head == Head::Gaussian && self.output_dim != 2 {
            return config_err(format!(
                "gaussian head needs output_dim = 2, got {}",
                self.output_dim
            ));
        }
        Ok(())
    }

    /// `(in, out)` for each affine layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in self.hidden_dims.iter().chain(std::iter::once(&self.output_dim)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// Weights and biases of a [`NetConfig`] network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    config: NetConfig,
    values: Vec<f64>,
}

impl NetParams {
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let values = vec![0.0; config.num_params()];
        Ok(Self { config, values })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        let mut offset = 0;
        for (fan_in, fan_out) in params.config.layer_dims() {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut params.values[offset..offset + fan_in * fan_out] {
                *w = rng.gen_range(-limit..limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(params)
    }

    pub fn from_values(config: NetConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if values.len() != config.num_params() {
            return config_err(format!(
                "expected {} parameters, got {}",
                config.num_params(),
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AuditError::Input("parameters must be finite".into()));
        }
        Ok(Self { config, values })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Borrow `(weights, biases)` of layer `index`.
    pub fn layer(&self, index: usize) -> (&[f64], &[f64]) {
        let dims = self.config.layer_dims();
        let offset: usize = dims[..index].iter().map(|(i, o)| i * o + o).sum();
        let (fan_in, fan_out) = dims[index];
        let w = &self.values[offset..offset + fan_in * fan_out];
        let b = &self.values[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        (w, b)
    }

    pub fn layer_mut(&mut self, index: usize) -> (&mut [f64], &mut [f64]) {
        let dims = self.config.layer_dims();
        let offset: usize = dims[..index].iter().map(|(i, o)| i * o + o).sum();
        let (fan_in, fan_out) = dims[index];
        let (w, rest) = self.values[offset..].split_at_mut(fan_in * fan_out);
        (w, &mut rest[..fan_out])
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &NetParams) -> bool {
        self.config == other.config
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &NetParams) -> Result<()> {
        if !self.same_shape(other) {
            return config_err("parameter shapes differ");
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// Little-endian bytes of every parameter, for hashing releases.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Supervision signal for one example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Label(usize),
    Value(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub features: &'a [f64],
    pub target: Target,
}

/// Pre-activations and activations from one forward pass.
struct Trace {
    /// `activations[0]` is the input; `activations[l + 1]` the output of layer `l`.
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

fn check_input(params: &NetParams, x: &[f64]) -> Result<()> {
    if x.len() != params.config.input_dim {
        return config_err(format!(
            "input has {} entries, network expects {}",
            x.len(),
            params.config.input_dim
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AuditError::Input("input features must be finite".into()));
    }
    Ok(())
}

fn forward_trace(params: &NetParams, x: &[f64]) -> Trace {
    let dims = params.config.layer_dims();
    let last = dims.len() - 1;
    let mut activations = Vec::with_capacity(dims.len() + 1);
    let mut pre = Vec::with_capacity(dims.len());
    activations.push(x.to_vec());
    for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let (w, b) = params.layer(l);
        let input = &activations[l];
        let z: Vec<f64> = (0..fan_out)
            .map(|o| {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                row.iter().zip(input).fold(b[o], |acc, (wi, xi)| acc + wi * xi)
            })
            .collect();
        let a = if l == last {
            z.clone()
        } else {
            z.iter().map(|&v| params.config.activation.apply(v)).collect()
        };
        pre.push(z);
        activations.push(a);
    }
    Trace { activations, pre }
}

/// Network output: logits, or `(mu, log_sigma)` for a gaussian head.
pub fn forward(params: &NetParams, x: &[f64]) -> Result<Vec<f64>> {
    check_input(params, x)?;
    let mut trace = forward_trace(params, x);
    let out = trace.activations.pop().expect("at least one layer");
    if out.iter().any(|v| !v.is_finite()) {
        return Err(AuditError::Input("network output is not finite".into()));
    }
    Ok(out)
}

fn check_loss(params: &NetParams, loss: Loss) -> Result<()> {
    if Loss::for_head(params.config.head) != loss {
        return config_err(format!(
            "loss {loss:?} is incompatible with head {:?}",
            params.config.head
        ));
    }
    Ok(())
}

/// Loss value and its gradient with respect to the network outputs.
fn output_loss_grad(out: &[f64], target: Target, loss: Loss) -> Result<(f64, Vec<f64>)> {
    match (loss, target) {
        (Loss::CrossEntropy, Target::Label(label)) => loss::cross_entropy_with_grad(out, label),
        (Loss::GaussianNll, Target::Value(s)) => {
            let (value, d_mu, d_log_sigma) = loss::gaussian_nll_grad(s, out[0], out[1]);
            Ok((value, vec![d_mu, d_log_sigma]))
        }
        (loss, target) => config_err(format!("target {target:?} does not fit loss {loss:?}")),
    }
}

/// Loss of a single example.
pub fn example_loss(params: &NetParams, x: &[f64], target: Target, loss: Loss) -> Result<f64> {
    check_loss(params, loss)?;
    let out = forward(params, x)?;
    Ok(output_loss_grad(&out, target, loss)?.0)
}

/// Loss and full parameter gradient for one example.
pub fn example_grad(
    params: &NetParams,
    x: &[f64],
    target: Target,
    loss: Loss,
) -> Result<(f64, NetParams)> {
    check_loss(params, loss)?;
    check_input(params, x)?;
    let trace = forward_trace(params, x);
    let out = trace.activations.last().expect("output layer");
    let (value, mut delta) = output_loss_grad(out, target, loss)?;

    let dims = params.config.layer_dims();
    let mut grad = NetParams {
        config: params.config.clone(),
        values: vec![0.0; params.values.len()],
    };
    for l in (0..dims.len()).rev() {
        let (fan_in, fan_out) = dims[l];
        let input = &trace.activations[l];
        {
            let (gw, gb) = grad.layer_mut(l);
            for o in 0..fan_out {
                let d = delta[o];
                gb[o] = d;
                for (g, xi) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                    *g = d * xi;
                }
            }
        }
        if l > 0 {
            let (w, _) = params.layer(l);
            let act = params.config.activation;
            delta = (0..fan_in)
                .map(|i| {
                    let back: f64 = (0..fan_out).map(|o| w[o * fan_in + i] * delta[o]).sum();
                    back * act.derivative(trace.pre[l - 1][i])
                })
                .collect();
        }
    }
    Ok((value, grad))
}

/// Per-example gradients of `loss` over a nonempty batch.
pub fn backward(params: &NetParams, batch: &[Sample<'_>], loss: Loss) -> Result<PerExampleGrads> {
    if batch.is_empty() {
        return Err(AuditError::Input("backward needs a nonempty batch".into()));
    }
    check_loss(params, loss)?;
    let grads = batch
        .iter()
        .map(|s| example_grad(params, s.features, s.target, loss).map(|(_, g)| g))
        .collect::<Result<Vec<_>>>()?;
    PerExampleGrads::new(grads)
}
