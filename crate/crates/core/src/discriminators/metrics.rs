use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::signal::Dataset;

const EVAL_CHUNK: usize = 4096;

/// `counts[prepared][assigned]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

impl ConfusionMatrix {
    pub fn zeros(d: usize) -> Self {
        ConfusionMatrix { counts: vec![vec![0; d]; d], total: 0 }
    }

    pub fn record(&mut self, prepared: usize, assigned: usize) {
        self.counts[prepared][assigned] += 1;
        self.total += 1;
    }

    pub fn merge(mut self, other: &ConfusionMatrix) -> Self {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
        self.total += other.total;
        self
    }

    pub fn dimension(&self) -> usize {
        self.counts.len()
    }

    pub fn correct(&self) -> u64 {
        (0..self.dimension()).map(|s| self.counts[s][s]).sum()
    }

    /// `trace / total`; 0 for an empty matrix.
    pub fn fidelity(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.correct() as f64 / self.total as f64
    }

    pub fn error_rate(&self) -> f64 {
        1.0 - self.fidelity()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Header `prepared,assigned_0,...,assigned_{d-1}`, one row per prepared state.
    pub fn to_csv(&self) -> String {
        let d = self.dimension();
        let mut out = String::from("prepared");
        for s in 0..d {
            let _ = write!(out, ",assigned_{s}");
        }
        out.push('\n');
        for (s, row) in self.counts.iter().enumerate() {
            let _ = write!(out, "{s}");
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

/// Classify every shot and tally prepared vs assigned state.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, data: &Dataset, exec: Execution) -> Result<ConfusionMatrix> {
    if data.is_empty() {
        return Err(Error::Input("cannot evaluate on an empty dataset".into()));
    }
    let d = data.dimension();
    if model.num_states() != d {
        return Err(Error::Input(format!("model has {} states, dataset has d = {d}", model.num_states())));
    }
    let partials = exec.map_chunks(data.shots(), EVAL_CHUNK, |chunk| {
        let mut cm = ConfusionMatrix::zeros(d);
        for shot in chunk {
            let assigned = model.classify(&shot.features)?;
            cm.record(shot.label.0, assigned.0);
        }
        Ok(cm)
    });
    partials
        .into_iter()
        .try_fold(ConfusionMatrix::zeros(d), |acc, p: Result<ConfusionMatrix>| Ok(acc.merge(&p?)))
}
