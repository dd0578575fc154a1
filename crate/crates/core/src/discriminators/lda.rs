use serde::{Deserialize, Serialize};

use super::{argmax, finite_point, ClassStats, Classifier, FitOptions, REGULARIZATION_EPSILON};
use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::signal::{Dataset, Features, IqPoint, StateLabel};

/// Per-state linear scores `wᵀx + b` from a pooled-covariance Gaussian fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDiscriminant {
    pub weights: Vec<[f64; 2]>,
    pub biases: Vec<f64>,
    pub trained_on: String,
}

/// `w = Σ⁻¹μ`, `b = −½ μᵀΣ⁻¹μ + log π`.
pub(crate) fn linear_terms(inv: &Mat2, mean: IqPoint, prior: f64) -> ([f64; 2], f64) {
    let w = inv.apply(mean.to_array());
    let b = -0.5 * (w[0] * mean.i + w[1] * mean.q) + prior.ln();
    (w, b)
}

#[inline]
pub(crate) fn linear_score(w: &[f64; 2], b: f64, x: IqPoint) -> f64 {
    w[0] * x.i + w[1] * x.q + b
}

pub fn fit_lda(data: &Dataset, opts: &FitOptions) -> Result<LinearDiscriminant> {
    let stats = ClassStats::from_dataset(data, 2, opts)?;
    let mut pooled = stats.pooled_covariance();
    if opts.regularize {
        pooled = pooled.add_ridge(REGULARIZATION_EPSILON);
    }
    let inv = pooled
        .inverse()
        .map_err(|e| Error::Fit(format!("pooled covariance is singular: {e}")))?;
    let (weights, biases) = (0..data.dimension())
        .map(|s| linear_terms(&inv, stats.means[s], stats.priors[s]))
        .unzip();
    Ok(LinearDiscriminant { weights, biases, trained_on: data.fingerprint() })
}

impl LinearDiscriminant {
    pub fn scores(&self, x: IqPoint) -> Vec<f64> {
        self.weights.iter().zip(&self.biases).map(|(w, &b)| linear_score(w, b, x)).collect()
    }
}

impl Classifier for LinearDiscriminant {
    fn num_states(&self) -> usize {
        self.weights.len()
    }

    fn classify(&self, features: &Features) -> Result<StateLabel> {
        let x = finite_point(features)?;
        Ok(StateLabel(argmax(&self.scores(x))))
    }
}
