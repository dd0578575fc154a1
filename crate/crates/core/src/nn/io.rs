//! Network file formats.
//!
//! Float models are JSON `{"dims": [...], "weights": [[...]; 3], "biases": [[...]; 3]}`
//! with row-major weights. Quantized models use a little-endian binary container:
//!
//! ```text
//! 0   8   magic b"QSDQMLP\0"
//! 8   4   version (u32, = 1)
//! 12  4   fractional bits (u32)
//! 16  16  dims (4 × u32)
//! 32  12  per-layer output shift (3 × u32)
//! 44  ..  per layer: weights (outputs × inputs int16, row-major), biases (outputs int16)
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{DenseLayer, MlpModel, QuantizedLayer, QuantizedMlp};
use crate::error::{Error, Result};

pub const QMLP_MAGIC: &[u8; 8] = b"QSDQMLP\0";
pub const QMLP_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FloatModelFile {
    dims: [usize; 4],
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

pub fn mlp_to_json(model: &MlpModel) -> String {
    let file = FloatModelFile {
        dims: model.dims(),
        weights: model.layers().iter().map(|l| l.weights.clone()).collect(),
        biases: model.layers().iter().map(|l| l.biases.clone()).collect(),
    };
    serde_json::to_string_pretty(&file).expect("model serialises")
}

pub fn mlp_from_json(text: &str) -> Result<MlpModel> {
    let file: FloatModelFile = serde_json::from_str(text).map_err(|e| Error::Format(format!("model JSON: {e}")))?;
    if file.weights.len() != 3 || file.biases.len() != 3 {
        return Err(Error::Format("model JSON must hold 3 weight and 3 bias arrays".into()));
    }
    let layers = (0..3)
        .map(|l| DenseLayer {
            inputs: file.dims[l],
            outputs: file.dims[l + 1],
            weights: file.weights[l].clone(),
            biases: file.biases[l].clone(),
        })
        .collect();
    MlpModel::from_layers(layers)
}

pub fn write_quantized<W: Write>(model: &QuantizedMlp, mut out: W) -> Result<()> {
    model.validate()?;
    out.write_all(QMLP_MAGIC)?;
    out.write_all(&QMLP_VERSION.to_le_bytes())?;
    out.write_all(&model.fractional_bits.to_le_bytes())?;
    for d in model.dims {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    for l in &model.layers {
        out.write_all(&l.shift.to_le_bytes())?;
    }
    for l in &model.layers {
        for v in l.weights.iter().chain(&l.biases) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated quantized model: {e}")))?;
    Ok(buf)
}

pub fn read_quantized<R: Read>(mut input: R) -> Result<QuantizedMlp> {
    if &take::<8, _>(&mut input)? != QMLP_MAGIC {
        return Err(Error::Format("bad quantized model magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut input)?);
    if version != QMLP_VERSION {
        return Err(Error::Format(format!("unsupported quantized model version {version}")));
    }
    let fractional_bits = u32::from_le_bytes(take(&mut input)?);
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = u32::from_le_bytes(take(&mut input)?) as usize;
    }
    super::validate_dims(&dims).map_err(|e| Error::Format(e.to_string()))?;
    let mut shifts = [0u32; 3];
    for s in &mut shifts {
        *s = u32::from_le_bytes(take(&mut input)?);
    }
    let mut read_vec = |n: usize| -> Result<Vec<i16>> { (0..n).map(|_| Ok(i16::from_le_bytes(take(&mut input)?))).collect() };
    let mut layers = Vec::with_capacity(3);
    for l in 0..3 {
        let (inputs, outputs) = (dims[l], dims[l + 1]);
        let weights = read_vec(inputs * outputs)?;
        let biases = read_vec(outputs)?;
        layers.push(QuantizedLayer { inputs, outputs, weights, biases, shift: shifts[l] });
    }
    let model = QuantizedMlp { dims, fractional_bits, layers };
    model.validate()?;
    Ok(model)
}
