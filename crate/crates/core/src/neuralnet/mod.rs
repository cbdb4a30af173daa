//! Small dense networks for the actor and critic.
//!
//! Parameters live in a single flat vector so that optimizers, gradient
//! clipping and checkpoints can treat a network as one `Vec<f64>`. Each
//! layer stores its weights row-major (`n_out × n_in`) followed by its
//! biases. Hidden layers use `tanh`, the output layer is linear.

mod checkpoint;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use optim::{clip_gradients, AdamState};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hidden width of the actor and critic.
pub const HIDDEN_WIDTH: usize = 256;
/// Actor and critic input: the apple coordinate.
pub const STATE_DIM: usize = 3;

#[derive(Debug, Error)]
pub enum NeuralNetError {
    #[error("standard deviation must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("expected {expected} parameters for layers {sizes:?}, got {actual}")]
    ParamCount {
        sizes: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("network needs at least an input and an output layer")]
    TooFewLayers,
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("cannot access checkpoint {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Post-activation values of every layer, input first.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    activations: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least input layer")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }

    /// Post-activation values of layer `i` (`0` is the input).
    pub fn layer(&self, i: usize) -> &[f64] {
        &self.activations[i]
    }
}

pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

/// Layer sizes of the actor (`out_dim` = 2 per gain) or critic (`out_dim` = 1).
pub fn agent_layers(out_dim: usize) -> Vec<usize> {
    vec![STATE_DIM, HIDDEN_WIDTH, HIDDEN_WIDTH, out_dim]
}

impl Mlp {
    /// Uniform initialization in `±1/√fan_in` for weights and biases.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self, NeuralNetError> {
        if layer_sizes.len() < 2 {
            return Err(NeuralNetError::TooFewLayers);
        }
        let mut params = Vec::with_capacity(param_count(layer_sizes));
        for w in layer_sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] + 1) * w[1] {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self, NeuralNetError> {
        if layer_sizes.len() < 2 {
            return Err(NeuralNetError::TooFewLayers);
        }
        let expected = param_count(layer_sizes);
        if params.len() != expected {
            return Err(NeuralNetError::ParamCount {
                sizes: layer_sizes.to_vec(),
                expected,
                actual: params.len(),
            });
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self, NeuralNetError> {
        Self::from_params(layer_sizes, vec![0.0; param_count(layer_sizes)])
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> ForwardPass {
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        let n_layers = self.layer_sizes.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        let mut offset = 0;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            offset += (n_in + 1) * n_out;
            let input = &activations[l];
            let hidden = l + 1 < n_layers;
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    let z = row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>() + biases[o];
                    if hidden {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
            activations.push(out);
        }
        ForwardPass { activations }
    }

    /// Gradient of `upstream · output` with respect to every parameter.
    pub fn backward(&self, pass: &ForwardPass, upstream: &[f64]) -> Vec<f64> {
        assert_eq!(upstream.len(), self.output_dim(), "upstream dimension");
        let mut grads = vec![0.0; self.params.len()];
        let offsets: Vec<usize> = self
            .layer_sizes
            .windows(2)
            .scan(0, |acc, w| {
                let start = *acc;
                *acc += (w[0] + 1) * w[1];
                Some(start)
            })
            .collect();
        let mut delta = upstream.to_vec();
        for l in (0..self.layer_sizes.len() - 1).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let offset = offsets[l];
            let input = &pass.activations[l];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut grads[offset + o * n_in..offset + (o + 1) * n_in];
                    for (g, a) in row.iter_mut().zip(input) {
                        *g = d * a;
                    }
                }
                grads[offset + n_in * n_out + o] = d;
            }
            if l > 0 {
                let weights = &self.params[offset..offset + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                        *p += w * d;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
        grads
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Log density of a normal distribution and its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLogProb {
    pub log_prob: f64,
    pub d_mean: f64,
    pub d_sigma: f64,
}

pub fn gaussian_log_prob(value: f64, mean: f64, sigma: f64) -> Result<GaussianLogProb, NeuralNetError> {
    if !(sigma > 0.0) {
        return Err(NeuralNetError::NonPositiveSigma(sigma));
    }
    let diff = value - mean;
    let var = sigma * sigma;
    Ok(GaussianLogProb {
        log_prob: -0.5 * diff * diff / var - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln(),
        d_mean: diff / var,
        d_sigma: (diff * diff - var) / (var * sigma),
    })
}
