//! Fully connected network with tanh hidden layers and hand-written
//! backpropagation, plus the Adam optimizer used to train it.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Linear,
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    output: OutputActivation,
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input batch, `activations[l + 1]` the output
    /// of layer `l` after its nonlinearity.
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Parameter(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Dense {
                    weight: Array2::from_shape_fn((w[1], w[0]), |_| rng.random_range(-bound..bound)),
                    bias: Array1::from_shape_fn(w[1], |_| rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Ok(Mlp { layers, output })
    }

    pub fn from_layers(layers: Vec<Dense>, output: OutputActivation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Parameter("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.nrows() {
                return Err(Error::Dimension(format!("layer {i} bias does not match weight rows")));
            }
            if i > 0 && l.weight.ncols() != layers[i - 1].weight.nrows() {
                return Err(Error::Dimension(format!("layer {i} input does not match layer {}", i - 1)));
            }
        }
        Ok(Mlp { layers, output })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map(|l| l.weight.nrows()).unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn is_tanh(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.output == OutputActivation::Tanh
    }

    /// Forward pass over a `batch x input` matrix.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<ForwardCache> {
        if input.ncols() != self.input_size() {
            return Err(Error::Dimension(format!(
                "network expects {} inputs, got {}",
                self.input_size(),
                input.ncols()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = activations[i].dot(&layer.weight.t());
            z += &layer.bias;
            if self.is_tanh(i) {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::Dimension(e.to_string()))?;
        Ok(self.forward_batch(x)?.output().row(0).to_vec())
    }

    /// Backpropagates `upstream = dL/d(output)` (batch x output). Returns the
    /// parameter gradients summed over the batch and `dL/d(input)`.
    pub fn backward_batch(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<(MlpGrads, Array2<f64>)> {
        let out = cache.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Dimension(format!(
                "upstream gradient is {:?}, output is {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        let mut grads = MlpGrads::zeros_like(self);
        let mut delta = upstream.to_owned();
        for i in (0..self.layers.len()).rev() {
            if self.is_tanh(i) {
                delta.zip_mut_with(&cache.activations[i + 1], |d, a| *d *= 1.0 - a * a);
            }
            grads.weights[i] = delta.t().dot(&cache.activations[i]);
            grads.biases[i] = delta.sum_axis(Axis(0));
            delta = delta.dot(&self.layers[i].weight);
        }
        Ok((grads, delta))
    }

    /// Gradients of `upstream · net(input)` with respect to every parameter.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<MlpGrads> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::Dimension(e.to_string()))?;
        let u = ArrayView2::from_shape((1, upstream.len()), upstream).map_err(|e| Error::Dimension(e.to_string()))?;
        let cache = self.forward_batch(x)?;
        Ok(self.backward_batch(&cache, u)?.0)
    }

    /// All parameters, layer by layer (weights row-major, then biases).
    pub fn parameters(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>()).collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Dimension(format!(
                "{} parameters supplied, network has {}",
                params.len(),
                self.parameter_count()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Polyak averaging `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.weight.zip_mut_with(&o.weight, |t, o| *t = tau * o + (1.0 - tau) * *t);
            t.bias.zip_mut_with(&o.bias, |t, o| *t = tau * o + (1.0 - tau) * *t);
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: MlpGrads,
    v: MlpGrads,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: MlpGrads::zeros_like(net),
            v: MlpGrads::zeros_like(net),
        }
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let step = self.lr * c2.sqrt() / c1;
        let eps = self.eps * c2.sqrt();
        for (i, layer) in net.layers.iter_mut().enumerate() {
            update(
                &mut layer.weight,
                &mut self.m.weights[i],
                &mut self.v.weights[i],
                &grads.weights[i],
                b1,
                b2,
                step,
                eps,
            );
            update(&mut layer.bias, &mut self.m.biases[i], &mut self.v.biases[i], &grads.biases[i], b1, b2, step, eps);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update<D: ndarray::Dimension>(
    p: &mut ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    b1: f64,
    b2: f64,
    step: f64,
    eps: f64,
) {
    ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= step * *m / (v.sqrt() + eps);
    });
}
