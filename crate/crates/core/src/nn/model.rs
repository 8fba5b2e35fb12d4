use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::prob::{softmax, ProbVector};
use crate::{Error, Result};

/// Hidden-layer nonlinearity. The output layer is always affine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation. ReLU uses 0 at 0.
    #[inline]
    pub(crate) fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer: `weights` is `out x in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::Shape {
                expected: weights.rows(),
                actual: bias.len(),
            });
        }
        Ok(Dense { weights, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn num_params(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    pub(crate) fn affine(&self, x: &[f64], out: &mut [f64]) {
        self.weights.matvec(x, out);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    layers: Vec<Dense>,
    activation: Activation,
    seed: u64,
}

impl ClassifierModel {
    /// Assembles a model from explicit layers, checking that dimensions chain
    /// and all parameters are finite.
    pub fn from_layers(layers: Vec<Dense>, activation: Activation, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("model needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Shape {
                    expected: pair[0].outputs(),
                    actual: pair[1].inputs(),
                });
            }
        }
        for layer in &layers {
            if layer.inputs() == 0 || layer.outputs() == 0 {
                return Err(Error::config("layer sizes must be positive"));
            }
            if !layer.weights.is_finite() || layer.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidInput("non-finite parameter".into()));
            }
        }
        Ok(ClassifierModel {
            layers,
            activation,
            seed,
        })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    /// Layer sizes, input first.
    pub fn architecture(&self) -> Vec<usize> {
        let mut arch = vec![self.input_dim()];
        arch.extend(self.layers.iter().map(Dense::outputs));
        arch
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    /// Final-layer weights, one row per class (the class's weight vector
    /// over the penultimate features).
    pub fn logit_weights(&self) -> &Matrix {
        &self.layers[self.layers.len() - 1].weights
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite input".into()));
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut current = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.outputs()];
            layer.affine(&current, &mut next);
            if i < last {
                for v in &mut next {
                    *v = self.activation.apply(*v);
                }
            }
            current = next;
        }
        current
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<ProbVector> {
        Ok(softmax(&self.forward(x)?))
    }

    /// Flattened parameters in layer order: weights row-major, then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Shape {
                expected: self.num_params(),
                actual: params.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let w = layer.weights.as_mut_slice();
            w.copy_from_slice(&params[offset..offset + w.len()]);
            offset += w.len();
            let n = layer.bias.len();
            layer.bias.copy_from_slice(&params[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

/// Builds a model with Glorot-uniform weights and zero biases.
///
/// Weights of layer `l` are drawn from `U[-a, a]` with
/// `a = sqrt(6 / (fan_in + fan_out))`, layer by layer in row-major order
/// from a ChaCha8 stream seeded with `seed`. Hidden layers use ReLU.
pub fn init_model(arch: &[usize], seed: u64) -> Result<ClassifierModel> {
    init_model_with(arch, Activation::Relu, seed)
}

pub fn init_model_with(arch: &[usize], activation: Activation, seed: u64) -> Result<ClassifierModel> {
    if arch.len() < 2 {
        return Err(Error::config(format!(
            "architecture needs at least input and output sizes, got {arch:?}"
        )));
    }
    if arch.contains(&0) {
        return Err(Error::config(format!("layer sizes must be >= 1, got {arch:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = arch
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| (2.0 * rng.random::<f64>() - 1.0) * limit)
                .collect();
            Dense {
                weights: Matrix::from_vec(fan_out, fan_in, data).expect("sized above"),
                bias: vec![0.0; fan_out],
            }
        })
        .collect();
    Ok(ClassifierModel {
        layers,
        activation,
        seed,
    })
}
