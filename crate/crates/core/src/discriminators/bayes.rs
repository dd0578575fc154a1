use serde::{Deserialize, Serialize};

use super::argmax;
use super::normal::normal_cdf;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::Mat2;
use crate::signal::{generate_counts, mahalanobis_separation, GaussianStateModel, ShotMode, StateLabel, COVARIANCE_EPSILON};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

const MC_CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BayesMethod {
    Analytic,
    MonteCarlo,
}

/// Minimum achievable misassignment probability on a Gaussian cluster model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesBoundEstimate {
    pub error_probability: f64,
    pub method: BayesMethod,
    pub mc_shots: u64,
    /// 99% half-width; 0 for the analytic method.
    pub confidence_halfwidth: f64,
}

impl BayesBoundEstimate {
    /// One standard error of the estimate.
    pub fn sigma(&self) -> f64 {
        self.confidence_halfwidth / Z_99
    }
}

/// `Φ(−d_M/2)` for two equal-prior states sharing one covariance.
pub fn bayes_error_analytic(model: &GaussianStateModel) -> Result<BayesBoundEstimate> {
    model.validate()?;
    if model.dimension() != 2 || !model.has_equal_covariances() || !model.has_equal_priors() {
        return Err(Error::Unsupported(
            "analytic Bayes error needs d = 2 with equal covariances and priors; use the Monte Carlo estimate".into(),
        ));
    }
    let dm = mahalanobis_separation(model, StateLabel(0), StateLabel(1))?;
    Ok(BayesBoundEstimate {
        error_probability: normal_cdf(-dm / 2.0),
        method: BayesMethod::Analytic,
        mc_shots: 0,
        confidence_halfwidth: 0.0,
    })
}

struct TrueDensity {
    mean: [f64; 2],
    inv: Mat2,
    log_norm: f64,
}

/// Stratified Monte Carlo estimate with the exact posterior argmax.
///
/// State `s` receives `⌊shots·π_s⌋` shots (remainder to the lowest indices); the
/// error is `Σ π_s·ê_s` with variance `Σ π_s² ê_s(1−ê_s)/n_s`.
pub fn bayes_error_mc(
    model: &GaussianStateModel,
    shots: u64,
    seed: u64,
    exec: Execution,
) -> Result<BayesBoundEstimate> {
    if shots < 1000 {
        return Err(Error::Input(format!("Monte Carlo Bayes estimate needs >= 1000 shots, got {shots}")));
    }
    model.validate()?;
    let d = model.dimension();
    let priors: Vec<f64> = model.states().iter().map(|c| c.prior).collect();
    let mut counts: Vec<usize> = priors.iter().map(|p| (shots as f64 * p).floor() as usize).collect();
    let mut remainder = shots as usize - counts.iter().sum::<usize>();
    for c in counts.iter_mut() {
        if remainder == 0 {
            break;
        }
        *c += 1;
        remainder -= 1;
    }
    if counts.contains(&0) {
        return Err(Error::Input("too few Monte Carlo shots for the smallest prior".into()));
    }
    let densities = model
        .states()
        .iter()
        .map(|c| {
            let cov = c.covariance.add_ridge(COVARIANCE_EPSILON);
            Ok(TrueDensity { mean: c.mean.to_array(), inv: cov.inverse()?, log_norm: c.prior.ln() - 0.5 * cov.det().ln() })
        })
        .collect::<Result<Vec<_>>>()?;
    let data = generate_counts(model, &counts, seed, ShotMode::Integrated, exec)?;

    let partial: Vec<Vec<u64>> = exec.map_chunks(data.shots(), MC_CHUNK, |chunk| {
        let mut wrong = vec![0u64; d];
        let mut scores = vec![0.0; d];
        for shot in chunk {
            let x = shot.features.integrated();
            for (score, dens) in scores.iter_mut().zip(&densities) {
                let diff = [x.i - dens.mean[0], x.q - dens.mean[1]];
                *score = dens.log_norm - 0.5 * dens.inv.quad_form(diff);
            }
            if argmax(&scores) != shot.label.0 {
                wrong[shot.label.0] += 1;
            }
        }
        wrong
    });
    let mut wrong = vec![0u64; d];
    for p in partial {
        for (w, v) in wrong.iter_mut().zip(p) {
            *w += v;
        }
    }
    let (mut err, mut var) = (0.0, 0.0);
    for s in 0..d {
        let n = counts[s] as f64;
        let e = wrong[s] as f64 / n;
        err += priors[s] * e;
        var += priors[s] * priors[s] * e * (1.0 - e) / n;
    }
    Ok(BayesBoundEstimate {
        error_probability: err,
        method: BayesMethod::MonteCarlo,
        mc_shots: shots,
        confidence_halfwidth: Z_99 * var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{IqPoint, StateCluster};

    fn pair(sep: f64) -> GaussianStateModel {
        GaussianStateModel::isotropic(&[IqPoint::new(-sep / 2.0, 0.0), IqPoint::new(sep / 2.0, 0.0)], Mat2::IDENTITY)
            .unwrap()
    }

    #[test]
    fn analytic_examples() {
        assert_eq!(bayes_error_analytic(&pair(0.0)).unwrap().error_probability, 0.5);
        let e = bayes_error_analytic(&pair(2.0)).unwrap().error_probability;
        assert!((e - 0.158_655_253_931_457_05).abs() < 1e-12);
        let e = bayes_error_analytic(&pair(4.34)).unwrap().error_probability;
        assert!((e - 0.015_003_422_973_732_2).abs() < 1e-12);
        assert!((e - 0.0150).abs() < 5e-5);
    }

    #[test]
    fn analytic_rejects_unsupported_models() {
        let m = GaussianStateModel::new(vec![
            StateCluster { mean: IqPoint::new(0.0, 0.0), covariance: Mat2::IDENTITY, prior: 0.5 },
            StateCluster { mean: IqPoint::new(1.0, 0.0), covariance: Mat2::IDENTITY.scaled(2.0), prior: 0.5 },
        ])
        .unwrap();
        assert!(matches!(bayes_error_analytic(&m), Err(Error::Unsupported(_))));
        let tri = GaussianStateModel::isotropic(
            &[IqPoint::new(0.0, 0.0), IqPoint::new(1.0, 0.0), IqPoint::new(0.0, 1.0)],
            Mat2::IDENTITY,
        )
        .unwrap();
        assert!(matches!(bayes_error_analytic(&tri), Err(Error::Unsupported(_))));
    }

    #[test]
    fn monte_carlo_agrees_with_analytic() {
        for (sep, seed) in [(2.0, 1), (4.34, 2), (1.0, 3)] {
            let m = pair(sep);
            let exact = bayes_error_analytic(&m).unwrap().error_probability;
            let mc = bayes_error_mc(&m, 200_000, seed, Execution::Parallel).unwrap();
            assert!(
                (mc.error_probability - exact).abs() <= mc.confidence_halfwidth,
                "sep {sep}: mc {} ± {} vs {exact}",
                mc.error_probability,
                mc.confidence_halfwidth
            );
        }
    }

    #[test]
    fn qutrit_triangle_is_nearly_error_free() {
        let r = 6.0 / 3f64.sqrt();
        let means: Vec<IqPoint> = (0..3)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 3.0;
                IqPoint::new(r * a.cos(), r * a.sin())
            })
            .collect();
        let m = GaussianStateModel::isotropic(&means, Mat2::IDENTITY).unwrap();
        let mc = bayes_error_mc(&m, 60_000, 7, Execution::Parallel).unwrap();
        assert!(mc.error_probability < 0.01, "{mc:?}");
    }

    #[test]
    fn zero_overlap_and_mode_independence() {
        let m = GaussianStateModel::isotropic(&[IqPoint::new(-1.0, 0.0), IqPoint::new(1.0, 0.0)], Mat2::ZERO).unwrap();
        let mc = bayes_error_mc(&m, 5_000, 1, Execution::Parallel).unwrap();
        assert_eq!(mc.error_probability, 0.0);
        assert_eq!(mc.confidence_halfwidth, 0.0);
        let a = bayes_error_mc(&pair(2.0), 20_000, 9, Execution::Sequential).unwrap();
        let b = bayes_error_mc(&pair(2.0), 20_000, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(bayes_error_mc(&pair(2.0), 999, 9, Execution::Sequential).is_err());
    }
}
