use super::{Dataset, Features, GaussianStateModel, IqPoint, ReadoutTrace, Shot, ShotMode, StateLabel};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::Mat2;
use crate::rng;

/// Ridge added to every covariance before its Cholesky factorisation, which lets
/// zero-spread fixtures generate (near) deterministic points.
pub const COVARIANCE_EPSILON: f64 = 1e-12;

/// Draw `shots_per_state` shots for every state of `model`.
///
/// Shots are ordered state-major. State `s` uses random stream `s` of `seed`.
pub fn generate_shots(
    model: &GaussianStateModel,
    shots_per_state: usize,
    seed: u64,
    mode: ShotMode,
    exec: Execution,
) -> Result<Dataset> {
    if shots_per_state == 0 {
        return Err(Error::Input("shots_per_state must be >= 1".into()));
    }
    generate_counts(model, &vec![shots_per_state; model.dimension()], seed, mode, exec)
}

/// Like [`generate_shots`] but with an explicit shot count per state.
pub fn generate_counts(
    model: &GaussianStateModel,
    counts: &[usize],
    seed: u64,
    mode: ShotMode,
    exec: Execution,
) -> Result<Dataset> {
    model.validate()?;
    let d = model.dimension();
    if counts.len() != d {
        return Err(Error::Input(format!("{} shot counts given for d = {d}", counts.len())));
    }
    let (samples, period) = match mode {
        ShotMode::Integrated => (1, 0.0),
        ShotMode::Trace { samples, sample_period_ns } => {
            if samples == 0 {
                return Err(Error::Config("trace mode needs at least one sample".into()));
            }
            if sample_period_ns.is_nan() || sample_period_ns <= 0.0 {
                return Err(Error::Config(format!("sample period must be > 0 ns, got {sample_period_ns}")));
            }
            (samples, sample_period_ns)
        }
    };
    let factors = model
        .states()
        .iter()
        .map(|c| c.covariance.scaled(samples as f64).add_ridge(COVARIANCE_EPSILON).cholesky())
        .collect::<Result<Vec<Mat2>>>()?;

    let per_state: Vec<Vec<Shot>> = exec.map_range(d, |s| {
        let mut rng = rng::stream(seed, s as u64);
        let mean = model.states()[s].mean;
        let chol = factors[s];
        let mut draw = || {
            let (z0, z1) = rng::standard_normal_pair(&mut rng);
            let v = chol.apply([z0, z1]);
            IqPoint::new(mean.i + v[0], mean.q + v[1])
        };
        (0..counts[s])
            .map(|_| {
                let features = match mode {
                    ShotMode::Integrated => Features::Point(draw()),
                    ShotMode::Trace { .. } => {
                        let pts = (0..samples).map(|_| draw()).collect();
                        Features::Trace(ReadoutTrace { samples: pts, sample_period_ns: period })
                    }
                };
                Shot { features, label: StateLabel(s) }
            })
            .collect()
    });
    Dataset::new(d, seed, per_state.into_iter().flatten().collect())
}

/// Boxcar filter: component-wise mean of the trace samples.
pub fn integrate_trace(trace: &ReadoutTrace) -> Result<IqPoint> {
    let n = trace.samples().len();
    if n == 0 {
        return Err(Error::Input("cannot integrate an empty trace".into()));
    }
    let (si, sq) = trace.samples().iter().fold((0.0, 0.0), |(a, b), p| (a + p.i, b + p.q));
    Ok(IqPoint::new(si / n as f64, sq / n as f64))
}

/// `sqrt(Δμᵀ Σ⁻¹ Δμ)` with `Σ` the average of the two state covariances.
pub fn mahalanobis_separation(model: &GaussianStateModel, a: StateLabel, b: StateLabel) -> Result<f64> {
    let (ca, cb) = (model.state(a)?, model.state(b)?);
    let pooled = ca.covariance.add(cb.covariance).scaled(0.5);
    let inv = pooled.inverse()?;
    let diff = ca.mean.sub(cb.mean);
    Ok(inv.quad_form(diff).max(0.0).sqrt())
}
