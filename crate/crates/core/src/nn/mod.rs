//! The dense gesture classifier: `42 → 20 → 10 → m` with ReLU hidden layers.

mod eval;
mod io;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{argmax, evaluate, predict, EvalReport};
pub use io::{read_params, write_params, FLOAT_MAGIC};
pub(crate) use io::{write_spec_header as io_header, Reader as ByteReader};
pub use train::{loss_and_grad, sgd_step, train, TrainConfig, TrainHistory, LOG_CLAMP};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("layer spec needs at least two widths, all >= 1: {0:?}")]
    InvalidSpec(Vec<usize>),
    #[error("expected {expected} inputs, got {got}")]
    InputLen { expected: usize, got: usize },
    #[error("parameter shapes do not match")]
    ShapeMismatch,
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        (tag == 0).then_some(Activation::Relu)
    }

    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
        }
    }
}

/// Layer widths from input to output, plus the hidden activation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    sizes: Vec<usize>,
    hidden_activation: Activation,
}

impl LayerSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self, NetError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NetError::InvalidSpec(sizes));
        }
        Ok(Self {
            sizes,
            hidden_activation: Activation::Relu,
        })
    }

    /// `[42, 20, 10, 8]`.
    pub fn gesture_default() -> Self {
        Self::new(vec![42, 20, 10, 8]).expect("static spec")
    }

    /// Parses `"42,20,10,8"`.
    pub fn parse(s: &str) -> Result<Self, NetError> {
        let sizes = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| NetError::InvalidSpec(Vec::new()))?;
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    /// `(fan_in, fan_out)` for each affine layer.
    pub fn layer_dims(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sizes.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Σ (fan_in + 1) · fan_out over the affine layers.
pub fn param_count(spec: &LayerSpec) -> usize {
    spec.layer_dims().map(|(i, o)| (i + 1) * o).sum()
}

/// One affine layer; `weights` is `fan_out × fan_in` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            bias: vec![0.0; fan_out],
        }
    }

    #[inline]
    pub fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.fan_in..(o + 1) * self.fan_in]
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.fan_out).map(|o| {
            self.row(o)
                .iter()
                .zip(input)
                .fold(self.bias[o], |acc, (w, x)| acc + w * x)
        }));
    }
}

/// Network parameters θ.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub spec: LayerSpec,
    pub layers: Vec<Dense>,
}

impl MlpParams {
    pub fn zeros(spec: &LayerSpec) -> Self {
        Self {
            spec: spec.clone(),
            layers: spec.layer_dims().map(|(i, o)| Dense::zeros(i, o)).collect(),
        }
    }

    /// He-uniform weights `U(-√(6/fan_in), √(6/fan_in))`, zero biases.
    pub fn he_uniform<R: Rng + ?Sized>(spec: &LayerSpec, rng: &mut R) -> Self {
        let mut p = Self::zeros(spec);
        for layer in &mut p.layers {
            let limit = (6.0 / layer.fan_in as f64).sqrt();
            layer
                .weights
                .iter_mut()
                .for_each(|w| *w = rng.gen_range(-limit..limit));
        }
        p
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.spec)
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.fan_in == b.fan_in && a.fan_out == b.fan_out)
    }

    pub fn is_finite(&self) -> bool {
        self.iter_values().all(f64::is_finite)
    }

    /// Weights then bias, layer by layer.
    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn iter_values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn check_input(&self, features: &[f64]) -> Result<(), NetError> {
        if features.len() != self.spec.input_len() {
            return Err(NetError::InputLen {
                expected: self.spec.input_len(),
                got: features.len(),
            });
        }
        Ok(())
    }

    /// Post-activation outputs of every layer, the last one being the logits.
    pub fn activations(&self, features: &[f64]) -> Result<Vec<Vec<f64>>, NetError> {
        self.check_input(features)?;
        let act = self.spec.hidden_activation();
        let last = self.layers.len() - 1;
        let mut outs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { features } else { &outs[i - 1] };
            let mut out = Vec::with_capacity(layer.fan_out);
            layer.affine(input, &mut out);
            if i != last {
                out.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            outs.push(out);
        }
        Ok(outs)
    }
}

/// Last-layer scores `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits(pub Vec<f64>);

/// Softmax of the logits; sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities(pub Vec<f64>);

impl Probabilities {
    /// `(argmax, max)` with ties going to the lowest index.
    pub fn top(&self) -> (usize, f64) {
        let i = argmax(&self.0);
        (i, self.0[i])
    }
}

/// Softmax with the maximum logit subtracted first.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn forward(params: &MlpParams, features: &[f64]) -> Result<(Logits, Probabilities), NetError> {
    let mut acts = params.activations(features)?;
    let z = acts.pop().expect("at least one layer");
    let p = softmax(&z);
    Ok((Logits(z), Probabilities(p)))
}
