//! Three-layer feed-forward network used for state assignment.
//!
//! `L1 = ReLU(W1·x + B1)`, `L2 = ReLU(W2·L1 + B2)`, `L3 = W3·L2 + B3`; the predicted
//! state is the argmax of the raw `L3` logits. Softmax only appears in the training loss.

pub mod io;
mod quant;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discriminators::{argmax, Classifier};
use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{Features, StateLabel};

pub use quant::{
    forward_fixed_scalar, quantize_input, quantize_model, round_shift_half_up, saturate_i16, FixedForward, QuantizedLayer,
    QuantizedMlp, DEFAULT_FRACTIONAL_BITS,
};
pub use train::{backprop_gradients, cross_entropy_loss, train_sgd, Gradients, LayerGradient, TrainConfig, TrainOutcome};

/// Default widths for integrated IQ input: `[2, 8, 8, d]`.
pub fn default_dims(d: usize) -> [usize; 4] {
    [2, 8, 8, d]
}

/// Default widths for raw traces of `n` samples: `[2n, 16, 16, d]`.
pub fn default_trace_dims(n: usize, d: usize) -> [usize; 4] {
    [2 * n, 16, 16, d]
}

#[inline]
pub fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Dense layer, `weights` row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer { inputs, outputs, weights: vec![0.0; inputs * outputs], biases: vec![0.0; outputs] }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }

    pub fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.biases.iter().enumerate().map(|(r, &b)| {
            let row = &self.weights[r * self.inputs..(r + 1) * self.inputs];
            row.iter().zip(x).fold(b, |acc, (w, v)| acc + w * v)
        }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    dims: [usize; 4],
    layers: Vec<DenseLayer>,
}

pub(crate) fn validate_dims(dims: &[usize]) -> Result<[usize; 4]> {
    let arr: [usize; 4] = dims
        .try_into()
        .map_err(|_| Error::Config(format!("network needs 4 widths [n_in, h1, h2, n_out], got {}", dims.len())))?;
    if arr.contains(&0) {
        return Err(Error::Config(format!("network widths must be positive, got {arr:?}")));
    }
    if arr[3] < 2 {
        return Err(Error::Config("output width is the state count and must be >= 2".into()));
    }
    Ok(arr)
}

impl MlpModel {
    /// Weights uniform in `(−s, s)` with `s = weight_init_scale / sqrt(h_in)`, zero biases.
    pub fn init(dims: &[usize], seed: u64, weight_init_scale: f64) -> Result<Self> {
        let dims = validate_dims(dims)?;
        if !(weight_init_scale >= 0.0 && weight_init_scale.is_finite()) {
            return Err(Error::Config(format!("weight_init_scale must be finite and >= 0, got {weight_init_scale}")));
        }
        let mut rng = rng::stream(seed, rng::INIT_STREAM);
        let layers = (0..3)
            .map(|l| {
                let (h_in, h_out) = (dims[l], dims[l + 1]);
                let s = weight_init_scale / (h_in as f64).sqrt();
                let mut layer = DenseLayer::zeros(h_in, h_out);
                for w in &mut layer.weights {
                    *w = s * (2.0 * rng.gen::<f64>() - 1.0);
                }
                layer
            })
            .collect();
        Ok(MlpModel { dims, layers })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.len() != 3 {
            return Err(Error::Config(format!("network must have exactly 3 weighted layers, got {}", layers.len())));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Config(format!("layer {l} outputs {} but layer {} takes {}", pair[0].outputs, l + 1, pair[1].inputs)));
            }
        }
        let dims = validate_dims(&[layers[0].inputs, layers[0].outputs, layers[1].outputs, layers[2].outputs])?;
        for (l, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.inputs * layer.outputs || layer.biases.len() != layer.outputs {
                return Err(Error::Config(format!("layer {l} parameter arrays do not match its shape")));
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
                return Err(Error::ModelValidation(format!("layer {l} has non-finite parameters")));
            }
        }
        Ok(MlpModel { dims, layers })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn num_states(&self) -> usize {
        self.dims[3]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims[0] {
            return Err(Error::Input(format!("expected {} input features, got {}", self.dims[0], x.len())));
        }
        let mut a = Vec::with_capacity(self.dims[1]);
        let mut b = Vec::with_capacity(self.dims[2]);
        self.layers[0].affine(x, &mut a);
        a.iter_mut().for_each(|v| *v = relu(*v));
        self.layers[1].affine(&a, &mut b);
        b.iter_mut().for_each(|v| *v = relu(*v));
        self.layers[2].affine(&b, &mut a);
        Ok(a)
    }
}

/// Float logits `L3` for a feature vector.
pub fn forward_float(model: &MlpModel, x: &[f64]) -> Result<Vec<f64>> {
    model.forward(x)
}

impl Classifier for MlpModel {
    fn num_states(&self) -> usize {
        self.dims[3]
    }

    fn classify(&self, features: &Features) -> Result<StateLabel> {
        let x = features.to_vector();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite feature value".into()));
        }
        Ok(StateLabel(argmax(&self.forward(&x)?)))
    }
}
