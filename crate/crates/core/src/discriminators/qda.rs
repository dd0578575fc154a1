use serde::{Deserialize, Serialize};

use super::lda::{linear_score, linear_terms};
use super::{argmax, finite_point, ClassStats, Classifier, FitOptions, REGULARIZATION_EPSILON};
use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::signal::{Dataset, Features, IqPoint, StateLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QdaCovariance {
    #[default]
    PerState,
    /// Every state uses the pooled covariance (QDA degenerates to LDA).
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticState {
    pub mean: IqPoint,
    pub inverse_covariance: Mat2,
    pub log_det: f64,
    pub log_prior: f64,
}

/// `g_s(x) = −½(x−μ_s)ᵀΣ_s⁻¹(x−μ_s) − ½ log|Σ_s| + log π_s`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticDiscriminant {
    pub states: Vec<QuadraticState>,
    pub trained_on: String,
    /// Linear parts `(Σ_s⁻¹μ_s, −½μ_sᵀΣ_s⁻¹μ_s + log π_s)`; when every state shares one
    /// inverse covariance the quadratic and log-det terms cancel in the argmax and
    /// prediction uses these alone.
    #[serde(skip)]
    linear: Vec<([f64; 2], f64)>,
    #[serde(skip)]
    shared_covariance: bool,
}

pub fn fit_qda(data: &Dataset, opts: &FitOptions, covariance: QdaCovariance) -> Result<QuadraticDiscriminant> {
    let stats = ClassStats::from_dataset(data, 3, opts)?;
    let d = data.dimension();
    let ridge = |m: Mat2| if opts.regularize { m.add_ridge(REGULARIZATION_EPSILON) } else { m };
    let covs: Vec<Mat2> = match covariance {
        QdaCovariance::PerState => stats.covariances.iter().map(|&c| ridge(c)).collect(),
        QdaCovariance::Pooled => vec![ridge(stats.pooled_covariance()); d],
    };
    let mut states = Vec::with_capacity(d);
    for (s, cov) in covs.iter().enumerate() {
        let inverse_covariance = cov.inverse().map_err(|e| {
            Error::Fit(format!(
                "state {s} covariance is singular ({e}); enable covariance regularization to add a {REGULARIZATION_EPSILON:e} ridge"
            ))
        })?;
        let det = cov.det();
        if det <= 0.0 {
            return Err(Error::Fit(format!("state {s} covariance is not positive definite (det {det:e})")));
        }
        states.push(QuadraticState {
            mean: stats.means[s],
            inverse_covariance,
            log_det: det.ln(),
            log_prior: stats.priors[s].ln(),
        });
    }
    Ok(QuadraticDiscriminant::from_states(states, data.fingerprint()))
}

impl QuadraticDiscriminant {
    pub fn from_states(states: Vec<QuadraticState>, trained_on: String) -> Self {
        let shared_covariance = states.windows(2).all(|w| w[0].inverse_covariance == w[1].inverse_covariance);
        let linear = states
            .iter()
            .map(|s| linear_terms(&s.inverse_covariance, s.mean, s.log_prior.exp()))
            .collect();
        QuadraticDiscriminant { states, trained_on, linear, shared_covariance }
    }

    pub fn scores(&self, x: IqPoint) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| -0.5 * s.inverse_covariance.quad_form(x.sub(s.mean)) - 0.5 * s.log_det + s.log_prior)
            .collect()
    }

    pub fn has_shared_covariance(&self) -> bool {
        self.shared_covariance
    }
}

impl Classifier for QuadraticDiscriminant {
    fn num_states(&self) -> usize {
        self.states.len()
    }

    fn classify(&self, features: &Features) -> Result<StateLabel> {
        let x = finite_point(features)?;
        if self.shared_covariance {
            let reduced: Vec<f64> = self.linear.iter().map(|(w, b)| linear_score(w, *b, x)).collect();
            return Ok(StateLabel(argmax(&reduced)));
        }
        Ok(StateLabel(argmax(&self.scores(x))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discriminators::{evaluate, fit_lda};
    use crate::exec::Execution;
    use crate::signal::{generate_shots, GaussianStateModel, ShotMode, StateCluster};

    fn unequal_model() -> GaussianStateModel {
        GaussianStateModel::new(vec![
            StateCluster { mean: IqPoint::new(0.0, 0.0), covariance: Mat2::IDENTITY.scaled(0.25), prior: 0.5 },
            StateCluster { mean: IqPoint::new(0.5, 0.0), covariance: Mat2::IDENTITY.scaled(4.0), prior: 0.5 },
        ])
        .unwrap()
    }

    #[test]
    fn far_points_go_to_the_wide_state() {
        let train = generate_shots(&unequal_model(), 5_000, 1, ShotMode::Integrated, Execution::Parallel).unwrap();
        let qda = fit_qda(&train, &FitOptions::default(), QdaCovariance::PerState).unwrap();
        for x in [IqPoint::new(30.0, 0.0), IqPoint::new(-25.0, 40.0), IqPoint::new(0.0, -50.0)] {
            assert_eq!(qda.predict(x).unwrap(), StateLabel(1));
        }
        // scores follow the documented formula
        let s = &qda.states[1];
        let x = IqPoint::new(3.0, -1.0);
        let g = -0.5 * s.inverse_covariance.quad_form(x.sub(s.mean)) - 0.5 * s.log_det + s.log_prior;
        assert_eq!(qda.scores(x)[1], g);
    }

    #[test]
    fn beats_lda_on_unequal_covariances() {
        let model = unequal_model();
        let train = generate_shots(&model, 5_000, 2, ShotMode::Integrated, Execution::Parallel).unwrap();
        let test = generate_shots(&model, 5_000, 3, ShotMode::Integrated, Execution::Parallel).unwrap();
        let qda = fit_qda(&train, &FitOptions::default(), QdaCovariance::PerState).unwrap();
        let lda = fit_lda(&train, &FitOptions::default()).unwrap();
        let fq = evaluate(&qda, &test, Execution::Parallel).unwrap().fidelity();
        let fl = evaluate(&lda, &test, Execution::Parallel).unwrap().fidelity();
        assert!(fq - fl >= 0.05, "qda {fq} lda {fl}");
    }

    #[test]
    fn separable_clusters_are_perfect() {
        let model = GaussianStateModel::isotropic(
            &[IqPoint::new(-5.0, 0.0), IqPoint::new(5.0, 0.0), IqPoint::new(0.0, 8.0)],
            Mat2::IDENTITY.scaled(0.01),
        )
        .unwrap();
        let train = generate_shots(&model, 200, 4, ShotMode::Integrated, Execution::Sequential).unwrap();
        let qda = fit_qda(&train, &FitOptions::default(), QdaCovariance::PerState).unwrap();
        let cm = evaluate(&qda, &train, Execution::Sequential).unwrap();
        assert_eq!(cm.fidelity(), 1.0);
    }

    #[test]
    fn singular_state_covariance_suggests_regularization() {
        let pts = vec![
            (IqPoint::new(0.0, 0.0), 0),
            (IqPoint::new(1.0, 1.0), 0),
            (IqPoint::new(2.0, 2.0), 0),
            (IqPoint::new(5.0, 0.0), 1),
            (IqPoint::new(6.0, 1.0), 1),
            (IqPoint::new(5.0, 2.0), 1),
        ];
        let data = Dataset::from_points(2, 0, pts).unwrap();
        let err = fit_qda(&data, &FitOptions::default(), QdaCovariance::PerState).unwrap_err();
        assert!(err.to_string().contains("regularization"), "{err}");
        let opts = FitOptions { regularize: true, ..Default::default() };
        assert!(fit_qda(&data, &opts, QdaCovariance::PerState).is_ok());
    }
}
