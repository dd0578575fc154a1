//! Synthetic dispersive-readout data in the IQ plane.
//!
//! Each prepared state `|s⟩` is a 2-D Gaussian cluster with its own mean, covariance
//! and prior. Shots are drawn either as already-integrated IQ points or as raw
//! traces of `N` samples whose boxcar mean has the same distribution as an
//! integrated shot (each sample has covariance `N·Σ`).

mod generate;
pub mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat2;

pub use generate::{generate_counts, generate_shots, integrate_trace, mahalanobis_separation, COVARIANCE_EPSILON};

/// Identity of a prepared state, `0 ≤ index < d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateLabel(pub usize);

impl StateLabel {
    pub fn new(index: usize, dimension: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Config(format!("system dimension must be >= 2, got {dimension}")));
        }
        if index >= dimension {
            return Err(Error::Input(format!("state label {index} out of range for d = {dimension}")));
        }
        Ok(StateLabel(index))
    }

    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IqPoint {
    pub i: f64,
    pub q: f64,
}

impl IqPoint {
    pub const fn new(i: f64, q: f64) -> Self {
        IqPoint { i, q }
    }

    pub fn is_finite(&self) -> bool {
        self.i.is_finite() && self.q.is_finite()
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.i, self.q]
    }

    pub fn sub(self, other: IqPoint) -> [f64; 2] {
        [self.i - other.i, self.q - other.q]
    }
}

/// A raw demodulated readout record.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutTrace {
    samples: Vec<IqPoint>,
    sample_period_ns: f64,
}

impl ReadoutTrace {
    pub fn new(samples: Vec<IqPoint>, sample_period_ns: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Input("readout trace has no samples".into()));
        }
        if !(sample_period_ns > 0.0 && sample_period_ns.is_finite()) {
            return Err(Error::Input(format!("sample period must be > 0 ns, got {sample_period_ns}")));
        }
        if let Some(k) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Input(format!("trace sample {k} is not finite")));
        }
        Ok(ReadoutTrace { samples, sample_period_ns })
    }

    pub fn samples(&self) -> &[IqPoint] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_period_ns(&self) -> f64 {
        self.sample_period_ns
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        let samples = self.samples.iter().map(|s| IqPoint::new(alpha * s.i, alpha * s.q)).collect();
        ReadoutTrace::new(samples, self.sample_period_ns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateCluster {
    pub mean: IqPoint,
    pub covariance: Mat2,
    pub prior: f64,
}

/// Per-state Gaussian clusters of a `d`-level system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GaussianStateModel {
    states: Vec<StateCluster>,
}

impl GaussianStateModel {
    pub fn new(states: Vec<StateCluster>) -> Result<Self> {
        let model = GaussianStateModel { states };
        model.validate()?;
        Ok(model)
    }

    /// Equal priors, one shared covariance.
    pub fn isotropic(means: &[IqPoint], covariance: Mat2) -> Result<Self> {
        let prior = 1.0 / means.len().max(1) as f64;
        Self::new(means.iter().map(|&mean| StateCluster { mean, covariance, prior }).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.states.len();
        if d < 2 {
            return Err(Error::Config(format!("system dimension must be >= 2, got {d}")));
        }
        let mut prior_sum = 0.0;
        for (s, c) in self.states.iter().enumerate() {
            if !c.mean.is_finite() {
                return Err(Error::ModelValidation(format!("state {s}: mean is not finite")));
            }
            if !c.covariance.is_finite() || !c.covariance.is_symmetric() {
                return Err(Error::ModelValidation(format!("state {s}: covariance must be finite and symmetric")));
            }
            let (lo, _) = c.covariance.sym_eigenvalues();
            if lo < 0.0 {
                return Err(Error::ModelValidation(format!(
                    "state {s}: covariance is not positive definite (eigenvalue {lo})"
                )));
            }
            if !(c.prior > 0.0 && c.prior <= 1.0) {
                return Err(Error::ModelValidation(format!("state {s}: prior {} outside (0, 1]", c.prior)));
            }
            prior_sum += c.prior;
        }
        if (prior_sum - 1.0).abs() > 1e-9 {
            return Err(Error::ModelValidation(format!("priors sum to {prior_sum}, expected 1")));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[StateCluster] {
        &self.states
    }

    pub fn state(&self, label: StateLabel) -> Result<&StateCluster> {
        self.states
            .get(label.0)
            .ok_or_else(|| Error::Input(format!("state {} not in model of dimension {}", label.0, self.dimension())))
    }

    pub fn has_equal_covariances(&self) -> bool {
        let first = self.states[0].covariance;
        self.states.iter().all(|c| c.covariance == first)
    }

    pub fn has_equal_priors(&self) -> bool {
        let first = self.states[0].prior;
        self.states.iter().all(|c| (c.prior - first).abs() <= 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ShotMode {
    Integrated,
    Trace { samples: usize, sample_period_ns: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Point(IqPoint),
    Trace(ReadoutTrace),
}

impl Features {
    /// Boxcar-integrated IQ point (identity for integrated shots).
    pub fn integrated(&self) -> IqPoint {
        match self {
            Features::Point(p) => *p,
            Features::Trace(t) => integrate_trace(t).expect("traces are nonempty by construction"),
        }
    }

    /// Flat feature vector: `[i, q]`, or `[i0, q0, i1, q1, ...]` for traces.
    pub fn to_vector(&self) -> Vec<f64> {
        match self {
            Features::Point(p) => vec![p.i, p.q],
            Features::Trace(t) => t.samples().iter().flat_map(|s| [s.i, s.q]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub features: Features,
    pub label: StateLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dimension: usize,
    seed: u64,
    shots: Vec<Shot>,
}

impl Dataset {
    pub fn new(dimension: usize, seed: u64, shots: Vec<Shot>) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Config(format!("system dimension must be >= 2, got {dimension}")));
        }
        if shots.is_empty() {
            return Err(Error::Input("dataset has no shots".into()));
        }
        if let Some(s) = shots.iter().find(|s| s.label.0 >= dimension) {
            return Err(Error::Input(format!("label {} invalid for d = {dimension}", s.label.0)));
        }
        Ok(Dataset { dimension, seed, shots })
    }

    pub fn from_points(dimension: usize, seed: u64, points: impl IntoIterator<Item = (IqPoint, usize)>) -> Result<Self> {
        let shots = points
            .into_iter()
            .map(|(p, l)| Shot { features: Features::Point(p), label: StateLabel(l) })
            .collect();
        Self::new(dimension, seed, shots)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shots(&self) -> &[Shot] {
        &self.shots
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn is_integrated(&self) -> bool {
        self.shots.iter().all(|s| matches!(s.features, Features::Point(_)))
    }

    /// Each trace replaced by its boxcar mean.
    pub fn integrated(&self) -> Dataset {
        let shots = self
            .shots
            .iter()
            .map(|s| Shot { features: Features::Point(s.features.integrated()), label: s.label })
            .collect();
        Dataset { dimension: self.dimension, seed: self.seed, shots }
    }

    /// Integrated points and labels; errors on raw traces.
    pub fn points(&self) -> Result<Vec<(IqPoint, StateLabel)>> {
        self.shots
            .iter()
            .map(|s| match &s.features {
                Features::Point(p) => Ok((*p, s.label)),
                Features::Trace(_) => Err(Error::Input("dataset holds raw traces; integrate them first".into())),
            })
            .collect()
    }

    pub fn per_state_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.dimension];
        for s in &self.shots {
            counts[s.label.0] += 1;
        }
        counts
    }

    /// Same features with labels mapped through `perm` (`new = perm[old]`).
    pub fn relabeled(&self, perm: &[usize]) -> Result<Dataset> {
        if perm.len() != self.dimension {
            return Err(Error::Input("permutation length must equal d".into()));
        }
        let shots = self
            .shots
            .iter()
            .map(|s| Shot { features: s.features.clone(), label: StateLabel(perm[s.label.0]) })
            .collect();
        Dataset::new(self.dimension, self.seed, shots)
    }

    /// Short content hash (hex) of dimension, labels and feature bits.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.dimension as u64).to_le_bytes());
        for s in &self.shots {
            h.update((s.label.0 as u64).to_le_bytes());
            for v in s.features.to_vector() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..8])
    }

    /// Feature width for the network input layer.
    pub fn feature_width(&self) -> usize {
        self.shots[0].features.to_vector().len()
    }
}
