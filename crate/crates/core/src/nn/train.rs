use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DenseLayer, MlpModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::signal::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.05, epochs: 40, batch_size: 32, seed: 0, weight_init_scale: 1.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.weight_init_scale.is_nan() || self.weight_init_scale < 0.0 {
            return Err(Error::Config("weight_init_scale must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradients of the mean batch cross-entropy, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
    pub loss: f64,
}

fn log_softmax_at(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits[label] - lse
}

/// Mean softmax cross-entropy over `(features, label)` pairs.
pub fn cross_entropy_loss(model: &MlpModel, samples: &[(Vec<f64>, usize)]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in samples {
        total -= log_softmax_at(&model.forward(x)?, *y);
    }
    Ok(total / samples.len().max(1) as f64)
}

pub fn backprop_gradients(model: &MlpModel, batch: &[(Vec<f64>, usize)]) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::Input("gradient batch is empty".into()));
    }
    let [n_in, _, _, n_out] = model.dims();
    let layers = model.layers();
    let mut grads: Vec<LayerGradient> = layers
        .iter()
        .map(|l| LayerGradient { weights: vec![0.0; l.weights.len()], biases: vec![0.0; l.outputs] })
        .collect();
    let mut loss = 0.0;
    let (mut z1, mut z2, mut z3) = (Vec::new(), Vec::new(), Vec::new());
    for (x, y) in batch {
        if x.len() != n_in {
            return Err(Error::Input(format!("expected {n_in} features, got {}", x.len())));
        }
        if *y >= n_out {
            return Err(Error::Input(format!("label {y} out of range for {n_out} outputs")));
        }
        layers[0].affine(x, &mut z1);
        let a1: Vec<f64> = z1.iter().map(|&v| super::relu(v)).collect();
        layers[1].affine(&a1, &mut z2);
        let a2: Vec<f64> = z2.iter().map(|&v| super::relu(v)).collect();
        layers[2].affine(&a2, &mut z3);
        loss -= log_softmax_at(&z3, *y);

        let max = z3.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = z3.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let mut delta: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        delta[*y] -= 1.0;

        let inputs: [&[f64]; 3] = [x, &a1, &a2];
        let pre: [&[f64]; 2] = [&z1, &z2];
        for l in (0..3).rev() {
            let layer = &layers[l];
            let g = &mut grads[l];
            for r in 0..layer.outputs {
                g.biases[r] += delta[r];
                let row = &mut g.weights[r * layer.inputs..(r + 1) * layer.inputs];
                for (gw, a) in row.iter_mut().zip(inputs[l]) {
                    *gw += delta[r] * a;
                }
            }
            if l > 0 {
                delta = (0..layer.inputs)
                    .map(|c| {
                        let back: f64 = (0..layer.outputs).map(|r| layer.weight(r, c) * delta[r]).sum();
                        if pre[l - 1][c] > 0.0 {
                            back
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grads {
        g.weights.iter_mut().chain(g.biases.iter_mut()).for_each(|v| *v *= scale);
    }
    Ok(Gradients { layers: grads, loss: loss * scale })
}

fn apply_step(layers: &mut [DenseLayer], grads: &Gradients, lr: f64) {
    for (layer, g) in layers.iter_mut().zip(&grads.layers) {
        layer.weights.iter_mut().zip(&g.weights).for_each(|(w, d)| *w -= lr * d);
        layer.biases.iter_mut().zip(&g.biases).for_each(|(b, d)| *b -= lr * d);
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub initial_loss: f64,
    /// Full training-set loss after each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Plain mini-batch SGD on mean softmax cross-entropy, reshuffled every epoch.
pub fn train_sgd(model: &MlpModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n_in = model.dims()[0];
    if data.dimension() != model.num_states() {
        return Err(Error::Input(format!(
            "network has {} outputs but dataset has d = {}",
            model.num_states(),
            data.dimension()
        )));
    }
    let samples: Vec<(Vec<f64>, usize)> =
        data.shots().iter().map(|s| (s.features.to_vector(), s.label.0)).collect();
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.len() != n_in) {
        return Err(Error::Input(format!("network expects {n_in} features, dataset provides {}", x.len())));
    }
    let mut current = model.clone();
    let initial_loss = cross_entropy_loss(&current, &samples)?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = rng::stream(cfg.seed, rng::SHUFFLE_STREAM);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch: Vec<(Vec<f64>, usize)> = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&k| samples[k].clone()));
            let grads = backprop_gradients(&current, &batch)?;
            if !grads.loss.is_finite() {
                return Err(Error::TrainingDivergence { epoch, learning_rate: cfg.learning_rate });
            }
            apply_step(current.layers_mut(), &grads, cfg.learning_rate);
        }
        let loss = cross_entropy_loss(&current, &samples)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDivergence { epoch, learning_rate: cfg.learning_rate });
        }
        log::debug!("epoch {epoch}: loss {loss:.6}");
        epoch_losses.push(loss);
    }
    Ok(TrainOutcome { model: current, initial_loss, epoch_losses })
}
