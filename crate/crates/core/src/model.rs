//! Small dense classifiers with exact input gradients.
//!
//! A [`Model`] is a chain of [`DenseLayer`]s, each computing
//! `activation(W x + b)`. The last layer's output are the class logits.
//! Gradients with respect to the input are computed by a single reverse
//! sweep through the cached forward pass.
//!
//! The relu derivative at exactly zero is taken as 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative at the pre-activation `z`. One-sided (0) for relu at 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
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

/// Which model output the explanation constraints are built from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputLayer {
    #[default]
    Logits,
    Softmax,
}

impl FromStr for OutputLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logits" => Ok(OutputLayer::Logits),
            "softmax" => Ok(OutputLayer::Softmax),
            other => Err(Error::InvalidConfig(format!(
                "unknown output layer {other:?}, expected logits|softmax"
            ))),
        }
    }
}

impl fmt::Display for OutputLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputLayer::Logits => "logits",
            OutputLayer::Softmax => "softmax",
        })
    }
}

/// Dense layer `y = activation(W x + b)`, weights row-major `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayer", into = "RawLayer")]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct RawLayer {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: Activation,
}

impl TryFrom<RawLayer> for DenseLayer {
    type Error = Error;

    fn try_from(raw: RawLayer) -> Result<Self> {
        DenseLayer::from_rows(raw.weights, raw.bias, raw.activation)
    }
}

impl From<DenseLayer> for RawLayer {
    fn from(layer: DenseLayer) -> Self {
        RawLayer {
            weights: layer.weights.chunks(layer.in_dim).map(<[f64]>::to_vec).collect(),
            bias: layer.bias,
            activation: layer.activation,
        }
    }
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidModel("layer dimensions must be positive".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::Dimension {
                what: "layer weights",
                expected: in_dim * out_dim,
                got: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::Dimension {
                what: "layer bias",
                expected: out_dim,
                got: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
            return Err(Error::InvalidModel("non-finite weight or bias".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        let out_dim = rows.len();
        let in_dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != in_dim) {
            return Err(Error::Dimension {
                what: "weight row",
                expected: in_dim,
                got: bad.len(),
            });
        }
        Self::new(in_dim, out_dim, rows.concat(), bias, activation)
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Row `o` of the weight matrix.
    pub fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }

    /// Pre-activation `W x + b`.
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }
}

/// Cached intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input to each layer (`inputs[0]` is the model input).
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pub pre: Vec<Vec<f64>>,
    /// Final layer output (logits).
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct Model {
    input_dim: usize,
    layers: Vec<DenseLayer>,
}

#[derive(Deserialize)]
struct RawModel {
    input_dim: usize,
    layers: Vec<DenseLayer>,
}

impl TryFrom<RawModel> for Model {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        Model::new(raw.input_dim, raw.layers)
    }
}

impl Model {
    pub fn new(input_dim: usize, layers: Vec<DenseLayer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidModel("input_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidModel("model needs at least one layer".into()));
        }
        let mut dim = input_dim;
        for layer in &layers {
            if layer.in_dim() != dim {
                return Err(Error::Dimension {
                    what: "layer input",
                    expected: dim,
                    got: layer.in_dim(),
                });
            }
            dim = layer.out_dim();
        }
        Ok(Self { input_dim, layers })
    }

    /// Single identity layer `f(x) = W x + b`.
    pub fn linear(rows: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let layer = DenseLayer::from_rows(rows, bias, Activation::Identity)?;
        Self::new(layer.in_dim(), vec![layer])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                what: "model input",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite input value".into()));
        }
        Ok(())
    }

    fn check_class(&self, j: usize) -> Result<()> {
        if j >= self.num_classes() {
            return Err(Error::InvalidClass {
                index: j,
                num_classes: self.num_classes(),
            });
        }
        Ok(())
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for layer in &self.layers {
            let z = layer.affine(&a);
            let next = z.iter().map(|&zi| layer.activation().apply(zi)).collect();
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(z);
        }
        Ok(Trace {
            inputs,
            pre,
            logits: a,
        })
    }

    /// Logits `f(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.logits)
    }

    /// Model outputs at the chosen layer.
    pub fn outputs(&self, x: &[f64], layer: OutputLayer) -> Result<Vec<f64>> {
        let logits = self.forward(x)?;
        Ok(match layer {
            OutputLayer::Logits => logits,
            OutputLayer::Softmax => softmax(&logits),
        })
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Pulls `seed` (a cotangent on the logits) back to the input:
    /// returns `J(x)^T seed`.
    pub fn backward(&self, trace: &Trace, seed: &[f64]) -> Vec<f64> {
        debug_assert_eq!(seed.len(), self.num_classes());
        let mut delta = seed.to_vec();
        for (layer, z) in self.layers.iter().zip(&trace.pre).rev() {
            let act = layer.activation();
            let dz: Vec<f64> = delta.iter().zip(z).map(|(d, &zi)| d * act.derivative(zi)).collect();
            let mut prev = vec![0.0; layer.in_dim()];
            for (row, &g) in layer.weights().chunks_exact(layer.in_dim()).zip(&dz) {
                if g == 0.0 {
                    continue;
                }
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += g * w;
                }
            }
            delta = prev;
        }
        delta
    }

    /// `∇ f_j(x)` of logit `j`.
    pub fn gradient(&self, x: &[f64], j: usize) -> Result<Vec<f64>> {
        self.output_gradient(x, j, OutputLayer::Logits)
    }

    pub fn output_gradient(&self, x: &[f64], j: usize, layer: OutputLayer) -> Result<Vec<f64>> {
        self.check_class(j)?;
        let trace = self.trace(x)?;
        Ok(self.backward(&trace, &output_seed(&trace.logits, j, layer)))
    }

    /// Outputs and the gradients of every output, sharing one forward pass.
    pub fn outputs_and_gradients(
        &self,
        x: &[f64],
        layer: OutputLayer,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let trace = self.trace(x)?;
        let grads = (0..self.num_classes())
            .map(|j| self.backward(&trace, &output_seed(&trace.logits, j, layer)))
            .collect();
        let outputs = match layer {
            OutputLayer::Logits => trace.logits,
            OutputLayer::Softmax => softmax(&trace.logits),
        };
        Ok((outputs, grads))
    }

    /// Central finite differences `(f_j(x + h e_i) - f_j(x - h e_i)) / 2h`.
    pub fn finite_difference_gradient(&self, x: &[f64], j: usize, step: f64) -> Result<Vec<f64>> {
        self.check_class(j)?;
        self.check_input(x)?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidConfig(format!("step must be positive, got {step}")));
        }
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|i| {
                probe[i] = x[i] + step;
                let up = self.forward(&probe)?[j];
                probe[i] = x[i] - step;
                let down = self.forward(&probe)?[j];
                probe[i] = x[i];
                Ok((up - down) / (2.0 * step))
            })
            .collect()
    }

    /// Sign pattern of every relu unit (`true` when the pre-activation is positive).
    pub fn relu_pattern(&self, x: &[f64]) -> Result<Vec<bool>> {
        let trace = self.trace(x)?;
        Ok(self
            .layers
            .iter()
            .zip(&trace.pre)
            .filter(|(l, _)| l.activation() == Activation::Relu)
            .flat_map(|(_, z)| z.iter().map(|&zi| zi > 0.0))
            .collect())
    }

    /// Smallest `|z|` over relu pre-activations, `inf` when there are none.
    pub fn relu_margin(&self, x: &[f64]) -> Result<f64> {
        let trace = self.trace(x)?;
        Ok(self
            .layers
            .iter()
            .zip(&trace.pre)
            .filter(|(l, _)| l.activation() == Activation::Relu)
            .flat_map(|(_, z)| z.iter().map(|zi| zi.abs()))
            .fold(f64::INFINITY, f64::min))
    }
}

fn output_seed(logits: &[f64], j: usize, layer: OutputLayer) -> Vec<f64> {
    match layer {
        OutputLayer::Logits => {
            let mut seed = vec![0.0; logits.len()];
            seed[j] = 1.0;
            seed
        }
        OutputLayer::Softmax => {
            // d p_j / d z_k = p_j (1[j = k] - p_k)
            let p = softmax(logits);
            p.iter()
                .enumerate()
                .map(|(k, &pk)| p[j] * (if k == j { 1.0 } else { 0.0 } - pk))
                .collect()
        }
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
