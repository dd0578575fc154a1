//! 16-bit fixed-point network.
//!
//! Parameters and activations are Q(15−f).f signed 16-bit values (Q3.12 by default).
//! A layer accumulates `Σ w·x` (Q.2f) plus the bias aligned to Q.2f in a signed
//! accumulator of at least 48 bits, shifts right by `f` with round-half-up,
//! saturates to 16 bits and applies ReLU on the hidden layers.

use serde::{Deserialize, Serialize};

use super::MlpModel;
use crate::discriminators::{argmax, Classifier};
use crate::error::{Error, Result};
use crate::signal::{Features, StateLabel};

pub const DEFAULT_FRACTIONAL_BITS: u32 = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<i16>,
    pub biases: Vec<i16>,
    /// Right shift that brings the Q.2f accumulator back to Q.f.
    pub shift: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedMlp {
    pub dims: [usize; 4],
    pub fractional_bits: u32,
    pub layers: Vec<QuantizedLayer>,
}

fn encode(v: f64, fractional_bits: u32) -> Option<i16> {
    let scaled = (v * (1u64 << fractional_bits) as f64).round_ties_even();
    (scaled >= i16::MIN as f64 && scaled <= i16::MAX as f64).then_some(scaled as i16)
}

pub fn quantize_model(model: &MlpModel, fractional_bits: u32) -> Result<QuantizedMlp> {
    if fractional_bits == 0 || fractional_bits > 15 {
        return Err(Error::Config(format!("fractional_bits must be in 1..=15, got {fractional_bits}")));
    }
    let limit = (1u64 << (15 - fractional_bits)) as f64;
    let layers = model
        .layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let convert = |values: &[f64], kind: &'static str| {
                values
                    .iter()
                    .map(|&v| {
                        let fits = v.abs() < limit;
                        encode(v, fractional_bits).filter(|_| fits).ok_or(Error::Quantization {
                            layer: l,
                            kind,
                            value: v,
                            int_bits: 15 - fractional_bits,
                            fractional_bits,
                        })
                    })
                    .collect::<Result<Vec<i16>>>()
            };
            Ok(QuantizedLayer {
                inputs: layer.inputs,
                outputs: layer.outputs,
                weights: convert(&layer.weights, "weight")?,
                biases: convert(&layer.biases, "bias")?,
                shift: fractional_bits,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedMlp { dims: model.dims(), fractional_bits, layers })
}

/// Round-to-nearest-even, saturating to the 16-bit range.
pub fn quantize_input(x: &[f64], fractional_bits: u32) -> Vec<i16> {
    let scale = (1u64 << fractional_bits) as f64;
    x.iter()
        .map(|&v| (v * scale).round_ties_even().clamp(i16::MIN as f64, i16::MAX as f64) as i16)
        .collect()
}

/// Arithmetic right shift with round-half-up: `⌊(acc + 2^(s−1)) / 2^s⌋`.
#[inline]
pub fn round_shift_half_up(acc: i64, shift: u32) -> i64 {
    if shift == 0 {
        acc
    } else {
        (acc + (1i64 << (shift - 1))) >> shift
    }
}

/// Saturating narrow to 16 bits; the flag is true when clamping happened.
#[inline]
pub fn saturate_i16(v: i64) -> (i16, bool) {
    if v > i16::MAX as i64 {
        (i16::MAX, true)
    } else if v < i16::MIN as i64 {
        (i16::MIN, true)
    } else {
        (v as i16, false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedForward {
    pub logits: Vec<i16>,
    /// Number of layer outputs that were clamped to the 16-bit range.
    pub saturations: u32,
}

/// Scalar reference inference. Bit-exact and total: overflow saturates.
pub fn forward_fixed_scalar(model: &QuantizedMlp, x: &[i16]) -> Result<FixedForward> {
    if x.len() != model.dims[0] {
        return Err(Error::Input(format!("expected {} fixed-point inputs, got {}", model.dims[0], x.len())));
    }
    let mut saturations = 0;
    let mut act: Vec<i16> = x.to_vec();
    for (l, layer) in model.layers.iter().enumerate() {
        let next = (0..layer.outputs)
            .map(|r| {
                let row = &layer.weights[r * layer.inputs..(r + 1) * layer.inputs];
                let mut acc = (layer.biases[r] as i64) << model.fractional_bits;
                for (&w, &a) in row.iter().zip(&act) {
                    acc += w as i64 * a as i64;
                }
                let (v, sat) = saturate_i16(round_shift_half_up(acc, layer.shift));
                saturations += sat as u32;
                if l < 2 {
                    v.max(0)
                } else {
                    v
                }
            })
            .collect();
        act = next;
    }
    Ok(FixedForward { logits: act, saturations })
}

impl QuantizedMlp {
    pub fn num_states(&self) -> usize {
        self.dims[3]
    }

    pub fn dequantize(&self) -> Result<MlpModel> {
        let scale = 1.0 / (1u64 << self.fractional_bits) as f64;
        let layers = self
            .layers
            .iter()
            .map(|l| super::DenseLayer {
                inputs: l.inputs,
                outputs: l.outputs,
                weights: l.weights.iter().map(|&w| w as f64 * scale).collect(),
                biases: l.biases.iter().map(|&b| b as f64 * scale).collect(),
            })
            .collect();
        MlpModel::from_layers(layers)
    }

    pub fn validate(&self) -> Result<()> {
        super::validate_dims(&self.dims)?;
        if self.layers.len() != 3 || self.fractional_bits == 0 || self.fractional_bits > 15 {
            return Err(Error::Format("quantized network must have 3 layers and 1..=15 fractional bits".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.inputs != self.dims[l]
                || layer.outputs != self.dims[l + 1]
                || layer.weights.len() != layer.inputs * layer.outputs
                || layer.biases.len() != layer.outputs
                || layer.shift > 30
            {
                return Err(Error::Format(format!("quantized layer {l} does not match dims {:?}", self.dims)));
            }
        }
        Ok(())
    }

    pub fn fixed_logits(&self, features: &Features) -> Result<FixedForward> {
        let x = features.to_vector();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite feature value".into()));
        }
        forward_fixed_scalar(self, &quantize_input(&x, self.fractional_bits))
    }

    /// Parameter bytes (weights then biases, int16).
    pub fn parameter_bytes(&self) -> usize {
        self.layers.iter().map(|l| 2 * (l.weights.len() + l.biases.len())).sum()
    }
}

impl Classifier for QuantizedMlp {
    fn num_states(&self) -> usize {
        self.dims[3]
    }

    fn classify(&self, features: &Features) -> Result<StateLabel> {
        Ok(StateLabel(argmax(&self.fixed_logits(features)?.logits)))
    }
}
