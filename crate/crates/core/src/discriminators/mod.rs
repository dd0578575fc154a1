//! Classical IQ-plane discriminators and the metrics every classifier shares.
//!
//! [`Lda`] and [`Qda`] are Gaussian plug-in classifiers with pooled and per-state
//! covariance respectively. The minimum-error (Helstrom-style) limit is realised as
//! the Bayes error of the true Gaussian cluster model, either in closed form for
//! two equal-covariance states or by Monte Carlo with the exact posterior.

mod bayes;
mod lda;
mod metrics;
pub mod normal;
mod qda;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::signal::{Dataset, Features, IqPoint, StateLabel};

pub use bayes::{bayes_error_analytic, bayes_error_mc, BayesBoundEstimate, BayesMethod, Z_99};
pub use lda::{fit_lda, LinearDiscriminant};
pub use metrics::{evaluate, ConfusionMatrix};
pub use qda::{fit_qda, QdaCovariance, QuadraticDiscriminant, QuadraticState};

/// Ridge used when covariance regularisation is switched on.
pub const REGULARIZATION_EPSILON: f64 = 1e-9;

/// Anything that assigns a readout shot to a state.
pub trait Classifier: Sync {
    fn num_states(&self) -> usize;

    fn classify(&self, features: &Features) -> Result<StateLabel>;

    fn predict(&self, x: IqPoint) -> Result<StateLabel> {
        self.classify(&Features::Point(x))
    }
}

/// Index of the first maximal score.
pub fn argmax<T: PartialOrd + Copy>(scores: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = k;
        }
    }
    best
}

pub(crate) fn finite_point(features: &Features) -> Result<IqPoint> {
    let p = features.integrated();
    if !p.is_finite() {
        return Err(Error::Input(format!("non-finite IQ point ({}, {})", p.i, p.q)));
    }
    Ok(p)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Class priors; estimated from label frequencies when absent.
    pub priors: Option<Vec<f64>>,
    /// Add [`REGULARIZATION_EPSILON`]·I to every covariance estimate.
    pub regularize: bool,
}

/// Per-state sample statistics shared by LDA and QDA fits.
#[derive(Debug, Clone)]
pub(crate) struct ClassStats {
    pub counts: Vec<usize>,
    pub means: Vec<IqPoint>,
    /// ML scatter per state (divided by the state count).
    pub covariances: Vec<Mat2>,
    pub priors: Vec<f64>,
}

impl ClassStats {
    pub fn from_dataset(data: &Dataset, min_per_state: usize, opts: &FitOptions) -> Result<Self> {
        let d = data.dimension();
        let points = data.points()?;
        let mut counts = vec![0usize; d];
        let mut sums = vec![[0.0f64; 2]; d];
        for (p, l) in &points {
            if !p.is_finite() {
                return Err(Error::Input("dataset contains a non-finite IQ point".into()));
            }
            counts[l.0] += 1;
            sums[l.0][0] += p.i;
            sums[l.0][1] += p.q;
        }
        if let Some(s) = counts.iter().position(|&c| c < min_per_state) {
            return Err(Error::Fit(format!(
                "state {s} has {} shots, at least {min_per_state} required",
                counts[s]
            )));
        }
        let means: Vec<IqPoint> =
            (0..d).map(|s| IqPoint::new(sums[s][0] / counts[s] as f64, sums[s][1] / counts[s] as f64)).collect();
        let mut scatter = vec![[0.0f64; 3]; d];
        for (p, l) in &points {
            let [di, dq] = p.sub(means[l.0]);
            let acc = &mut scatter[l.0];
            acc[0] += di * di;
            acc[1] += di * dq;
            acc[2] += dq * dq;
        }
        let covariances = (0..d)
            .map(|s| {
                let n = counts[s] as f64;
                Mat2([[scatter[s][0] / n, scatter[s][1] / n], [scatter[s][1] / n, scatter[s][2] / n]])
            })
            .collect();
        let total = points.len() as f64;
        let priors = match &opts.priors {
            Some(p) => {
                if p.len() != d || p.iter().any(|&v| v.is_nan() || v <= 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("priors {p:?} must be {d} positive values summing to 1")));
                }
                p.clone()
            }
            None => counts.iter().map(|&c| c as f64 / total).collect(),
        };
        Ok(ClassStats { counts, means, covariances, priors })
    }

    /// Count-weighted average of the per-state ML covariances.
    pub fn pooled_covariance(&self) -> Mat2 {
        let total: usize = self.counts.iter().sum();
        self.covariances
            .iter()
            .zip(&self.counts)
            .fold(Mat2::ZERO, |acc, (c, &n)| acc.add(c.scaled(n as f64)))
            .scaled(1.0 / total as f64)
    }
}
