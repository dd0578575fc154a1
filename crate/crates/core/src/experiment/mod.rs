//! Config-driven experiment runs: data generation through accelerator reports.
//!
//! Every stage draws its randomness from `stage_seed(config.seed, STAGE_*)`, so a run
//! is a pure function of the config. Each stage recomputes its prerequisites in
//! memory rather than reading earlier outputs, which keeps standalone subcommands and
//! `bench` numerically identical.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use config::{
    default_state_model, load_config, parse_config, BayesConfig, DatasetConfig, DiscriminatorKind, ExperimentConfig,
    NnConfig, QuantizationConfig, SimConfig, DEFAULT_SEPARATION,
};

use crate::aie::{
    compute_utilization, estimate_power, map_to_schedule, simulate_kernel, simulate_pipeline, KernelSchedule,
    PipelineRun, PowerEstimate, SimReport, STAGE_NAMES,
};
use crate::discriminators::{
    bayes_error_analytic, bayes_error_mc, evaluate, fit_lda, fit_qda, BayesBoundEstimate, Classifier,
    ConfusionMatrix, FitOptions, QdaCovariance,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nn::{self, io::mlp_to_json, quantize_input, quantize_model, train_sgd, MlpModel, QuantizedMlp, TrainOutcome};
use crate::rng::stage_seed;
use crate::signal::{self, generate_shots, Dataset, GaussianStateModel, ShotMode};

pub const STAGE_TRAIN_DATA: u64 = 1;
pub const STAGE_TEST_DATA: u64 = 2;
pub const STAGE_NN_INIT: u64 = 3;
pub const STAGE_NN_SHUFFLE: u64 = 4;
pub const STAGE_BAYES: u64 = 5;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A named output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn text(name: impl Into<String>, text: String) -> Self {
        Artifact { name: name.into(), bytes: text.into_bytes() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Gen,
    Train,
    Quantize,
    Eval,
    Sim,
    Bench,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesSummary {
    pub monte_carlo: BayesBoundEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<BayesBoundEstimate>,
}

impl BayesSummary {
    /// Analytic value when the model admits one, otherwise the Monte Carlo estimate.
    pub fn best(&self) -> &BayesBoundEstimate {
        self.analytic.as_ref().unwrap_or(&self.monte_carlo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: BTreeMap<String, ConfusionMatrix>,
    pub bayes: BayesSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationSummary {
    pub kernel_tile_pct: f64,
    pub buffer_tile_pct: f64,
    pub stream_tile_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub tool_version: String,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    /// Wall-clock time of the run; the only field allowed to differ between reruns.
    pub generated_unix_s: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub fidelity: BTreeMap<String, f64>,
    pub bayes_error: f64,
    pub bayes_method: crate::discriminators::BayesMethod,
    pub bayes_mc_error: f64,
    pub bayes_mc_sigma: f64,
    pub kernel_cycles: u64,
    pub kernel_ns: f64,
    pub kernel_matches_scalar: bool,
    pub end_to_end_ns_per_shot: f64,
    pub throughput_shots_per_s: f64,
    pub utilization: UtilizationSummary,
    pub power: PowerEstimate,
    pub provenance: Provenance,
}

impl BenchmarkSummary {
    /// The summary with wall-clock metadata cleared, for reproducibility checks.
    pub fn without_timestamp(&self) -> Self {
        let mut s = self.clone();
        s.provenance.generated_unix_s = 0;
        s
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub schedule: KernelSchedule,
    pub report: SimReport,
    pub pipeline: PipelineRun,
    /// Test shots whose kernel label differs from the scalar fixed-point reference.
    pub kernel_mismatches: usize,
}

/// Lazily evaluated stages of one experiment.
pub struct Experiment {
    cfg: ExperimentConfig,
    exec: Execution,
    model: GaussianStateModel,
    data: Option<(Dataset, Dataset)>,
    trained: Option<TrainOutcome>,
    quantized: Option<QuantizedMlp>,
    eval: Option<EvalReport>,
    sim: Option<SimOutcome>,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let model = cfg.state_model()?;
        let exec = cfg.execution;
        Ok(Experiment { cfg, exec, model, data: None, trained: None, quantized: None, eval: None, sim: None })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn state_model(&self) -> &GaussianStateModel {
        &self.model
    }

    /// `(train, test)` datasets.
    pub fn datasets(&mut self) -> Result<(&Dataset, &Dataset)> {
        if self.data.is_none() {
            let ds = &self.cfg.dataset;
            let seed = self.cfg.seed;
            let train = generate_shots(&self.model, ds.train_shots_per_state, stage_seed(seed, STAGE_TRAIN_DATA), ds.mode, self.exec)?;
            let test = generate_shots(&self.model, ds.test_shots_per_state, stage_seed(seed, STAGE_TEST_DATA), ds.mode, self.exec)?;
            log::info!("generated {} train / {} test shots", train.len(), test.len());
            self.data = Some((train, test));
        }
        let (train, test) = self.data.as_ref().expect("datasets generated");
        Ok((train, test))
    }

    pub fn network_dims(&self) -> [usize; 4] {
        let width = match self.cfg.dataset.mode {
            ShotMode::Integrated => 2,
            ShotMode::Trace { samples, .. } => 2 * samples,
        };
        [width, self.cfg.nn.hidden[0], self.cfg.nn.hidden[1], self.cfg.d]
    }

    pub fn trained(&mut self) -> Result<&TrainOutcome> {
        if self.trained.is_none() {
            let dims = self.network_dims();
            let seed = self.cfg.seed;
            let init = MlpModel::init(&dims, stage_seed(seed, STAGE_NN_INIT), self.cfg.nn.weight_init_scale)?;
            let train_cfg = self.cfg.train_config(stage_seed(seed, STAGE_NN_SHUFFLE));
            let (train, _) = self.datasets()?;
            let outcome = train_sgd(&init, train, &train_cfg)?;
            log::info!(
                "trained {:?}: loss {:.5} -> {:.5}",
                dims,
                outcome.initial_loss,
                outcome.epoch_losses.last().copied().unwrap_or(outcome.initial_loss)
            );
            self.trained = Some(outcome);
        }
        Ok(self.trained.as_ref().expect("network trained"))
    }

    pub fn quantized(&mut self) -> Result<&QuantizedMlp> {
        if self.quantized.is_none() {
            let bits = self.cfg.quantization.fractional_bits;
            let q = quantize_model(&self.trained()?.model, bits)?;
            self.quantized = Some(q);
        }
        Ok(self.quantized.as_ref().expect("network quantized"))
    }

    pub fn eval(&mut self) -> Result<&EvalReport> {
        if self.eval.is_none() {
            let exec = self.exec;
            let kinds = self.cfg.discriminators.clone();
            let needs_nn = kinds.iter().any(|k| matches!(k, DiscriminatorKind::Nn | DiscriminatorKind::NnFixed));
            let (nn_model, q_model) = if needs_nn {
                (Some(self.trained()?.model.clone()), Some(self.quantized()?.clone()))
            } else {
                (None, None)
            };
            let (train, test) = self.datasets()?;
            let train_points = train.integrated();
            let mut confusion = BTreeMap::new();
            for kind in kinds {
                let cm = match kind {
                    DiscriminatorKind::Lda => evaluate(&fit_lda(&train_points, &FitOptions::default())?, test, exec)?,
                    DiscriminatorKind::Qda => evaluate(
                        &fit_qda(&train_points, &FitOptions::default(), QdaCovariance::PerState)?,
                        test,
                        exec,
                    )?,
                    DiscriminatorKind::Nn => evaluate(nn_model.as_ref().expect("nn trained"), test, exec)?,
                    DiscriminatorKind::NnFixed => evaluate(q_model.as_ref().expect("nn quantized"), test, exec)?,
                };
                log::info!("{}: fidelity {:.5}", kind.as_str(), cm.fidelity());
                confusion.insert(kind.as_str().to_string(), cm);
            }
            let bayes = self.bayes()?;
            self.eval = Some(EvalReport { confusion, bayes });
        }
        Ok(self.eval.as_ref().expect("evaluation done"))
    }

    pub fn bayes(&self) -> Result<BayesSummary> {
        let seed = stage_seed(self.cfg.seed, STAGE_BAYES);
        let monte_carlo = bayes_error_mc(&self.model, self.cfg.bayes.mc_shots, seed, self.exec)?;
        let analytic = match bayes_error_analytic(&self.model) {
            Ok(b) => Some(b),
            Err(Error::Unsupported(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(BayesSummary { monte_carlo, analytic })
    }

    pub fn sim(&mut self) -> Result<&SimOutcome> {
        if self.sim.is_none() {
            let exec = self.exec;
            let calib = self.cfg.calibration()?;
            let array = self.cfg.array.clone();
            let pipeline_cfg = self.cfg.pipeline.clone();
            let shots = self.cfg.sim.pipeline_shots;
            let q = self.quantized()?.clone();
            let schedule = map_to_schedule(&q, &array, &calib)?;
            let (_, test) = self.datasets()?;
            let bits = q.fractional_bits;
            let inputs: Vec<Vec<i16>> = exec.map(test.shots(), |s| quantize_input(&s.features.to_vector(), bits));
            let run = simulate_kernel(&schedule, &inputs, exec)?;
            let reference = exec.map(test.shots(), |s| q.classify(&s.features));
            let kernel_mismatches = reference
                .into_iter()
                .zip(&run.labels)
                .map(|(r, k)| r.map(|r| (r != *k) as usize))
                .sum::<Result<usize>>()?;
            let kernel_ns = run.constant_kernel_ns().ok_or_else(|| Error::Numerical("kernel latency varied across shots".into()))?;
            let pipeline = simulate_pipeline(&pipeline_cfg, &schedule, shots)?;
            let utilization = compute_utilization(&schedule, &array)?;
            let power = estimate_power(&utilization, &schedule, &calib);
            let mut latency = pipeline.report.clone();
            latency.kernel_ns = kernel_ns;
            let report = SimReport { latency_report: latency, utilization_report: utilization, power_estimate: power };
            log::info!("kernel {} cycles = {} ns", schedule.total_cycles, kernel_ns);
            self.sim = Some(SimOutcome { schedule, report, pipeline, kernel_mismatches });
        }
        Ok(self.sim.as_ref().expect("simulation done"))
    }

    pub fn summary(&mut self) -> Result<BenchmarkSummary> {
        let eval = self.eval()?.clone();
        let sim = self.sim()?.clone();
        let (seed, config_hash) = (self.cfg.seed, self.cfg.hash());
        let (train, test) = self.datasets()?;
        let provenance = Provenance {
            seed,
            config_hash,
            tool_version: TOOL_VERSION.to_string(),
            train_fingerprint: train.fingerprint(),
            test_fingerprint: test.fingerprint(),
            generated_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let best = eval.bayes.best();
        let lat = &sim.report.latency_report;
        let util = &sim.report.utilization_report;
        Ok(BenchmarkSummary {
            fidelity: eval.confusion.iter().map(|(k, cm)| (k.clone(), cm.fidelity())).collect(),
            bayes_error: best.error_probability,
            bayes_method: best.method,
            bayes_mc_error: eval.bayes.monte_carlo.error_probability,
            bayes_mc_sigma: eval.bayes.monte_carlo.sigma(),
            kernel_cycles: sim.schedule.total_cycles,
            kernel_ns: lat.kernel_ns,
            kernel_matches_scalar: sim.kernel_mismatches == 0,
            end_to_end_ns_per_shot: lat.end_to_end_ns_per_shot,
            throughput_shots_per_s: lat.steady_state_throughput_shots_per_s,
            utilization: UtilizationSummary {
                kernel_tile_pct: util.kernel_tile_pct,
                buffer_tile_pct: util.buffer_tile_pct,
                stream_tile_pct: util.stream_tile_pct,
            },
            power: sim.report.power_estimate.clone(),
            provenance,
        })
    }

    /// Output files of one stage. `Bench` produces the union of all stages plus
    /// `summary.json`.
    pub fn artifacts(&mut self, stage: Stage) -> Result<Vec<Artifact>> {
        let mut out = Vec::new();
        match stage {
            Stage::Gen => {
                let (train, test) = self.datasets()?;
                for (name, data) in [("train", train), ("test", test)] {
                    let mut bytes = Vec::new();
                    let file = if data.is_integrated() {
                        signal::io::write_csv(data, &mut bytes)?;
                        format!("{name}.csv")
                    } else {
                        signal::io::write_trace_binary(data, &mut bytes)?;
                        format!("{name}.bin")
                    };
                    out.push(Artifact { name: file, bytes });
                }
            }
            Stage::Train => {
                let t = self.trained()?;
                let mut log = String::from("epoch,loss\n");
                writeln!(log, "0,{}", t.initial_loss).unwrap();
                for (e, l) in t.epoch_losses.iter().enumerate() {
                    writeln!(log, "{},{}", e + 1, l).unwrap();
                }
                out.push(Artifact::text("mlp.json", mlp_to_json(&t.model)));
                out.push(Artifact::text("train_loss.csv", log));
            }
            Stage::Quantize => {
                let mut bytes = Vec::new();
                nn::io::write_quantized(self.quantized()?, &mut bytes)?;
                out.push(Artifact { name: "mlp_q.bin".into(), bytes });
            }
            Stage::Eval => {
                let eval = self.eval()?;
                for (name, cm) in &eval.confusion {
                    out.push(Artifact::text(format!("confusion_{name}.csv"), cm.to_csv()));
                    let json = serde_json::json!({
                        "discriminator": name,
                        "fidelity": cm.fidelity(),
                        "error_rate": cm.error_rate(),
                        "confusion": cm,
                    });
                    out.push(Artifact::text(format!("confusion_{name}.json"), pretty(&json)));
                }
                out.push(Artifact::text("bayes.json", pretty(&eval.bayes)));
            }
            Stage::Sim => {
                let sim = self.sim()?;
                out.push(Artifact::text("sim_report.json", sim.report.to_json()));
                out.push(Artifact::text("placement.csv", sim.report.utilization_report.placement_csv()));
            }
            Stage::Report => {
                out.push(Artifact::text("iq_scatter.csv", self.iq_scatter_csv()?));
                out.push(Artifact::text("timeline.csv", self.timeline_csv()?));
                out.push(Artifact::text("placement_grid.csv", self.placement_grid_csv()?));
            }
            Stage::Bench => {
                for s in [Stage::Gen, Stage::Train, Stage::Quantize, Stage::Eval, Stage::Sim, Stage::Report] {
                    out.extend(self.artifacts(s)?);
                }
                out.push(Artifact::text("summary.json", pretty(&self.summary()?)));
            }
        }
        Ok(out)
    }

    /// Integrated test shots with their prepared state and the fixed-point network's
    /// assignment.
    pub fn iq_scatter_csv(&mut self) -> Result<String> {
        let q = self.quantized()?.clone();
        let exec = self.exec;
        let (_, test) = self.datasets()?;
        let assigned = exec.map(test.shots(), |s| q.classify(&s.features));
        let mut csv = String::from("i,q,prepared,assigned\n");
        for (shot, a) in test.shots().iter().zip(assigned) {
            let p = shot.features.integrated();
            writeln!(csv, "{},{},{},{}", p.i, p.q, shot.label.0, a?.0).unwrap();
        }
        Ok(csv)
    }

    /// Phase bars: one `init` bar, then `main` and per-stage bars for the first
    /// `sim.timeline_shots` shots, all offset by the initialisation time.
    pub fn timeline_csv(&mut self) -> Result<String> {
        let limit = self.cfg.sim.timeline_shots;
        let init_cycles = self.cfg.pipeline.init_cycles;
        let sim = self.sim()?;
        let clock = sim.schedule.clock_hz;
        let ns = |c: u64| crate::aie::cycles_to_ns(c + init_cycles, clock);
        let mut csv = String::from("phase,shot,start_ns,end_ns\n");
        writeln!(csv, "init,,0,{}", crate::aie::cycles_to_ns(init_cycles, clock)).unwrap();
        for span in sim.pipeline.spans.iter().take(limit) {
            writeln!(csv, "main,{},{},{}", span.shot, ns(span.control_start), ns(span.issued)).unwrap();
            for (k, name) in STAGE_NAMES.iter().enumerate() {
                writeln!(csv, "{name},{},{},{}", span.shot, ns(span.stage_start[k]), ns(span.stage_end[k])).unwrap();
            }
        }
        Ok(csv)
    }

    /// Every cell of the `(rows + 1) × cols` grid with 0/1 role flags.
    pub fn placement_grid_csv(&mut self) -> Result<String> {
        let (rows, cols) = (self.cfg.array.rows, self.cfg.array.cols);
        let sim = self.sim()?;
        let mut grid = vec![[0u8; 3]; (rows + 1) * cols];
        for p in &sim.report.utilization_report.placement {
            grid[p.row * cols + p.col][p.role as usize] = 1;
        }
        let mut csv = String::from("row,col,kernel,buffer,stream\n");
        for r in 0..=rows {
            for c in 0..cols {
                let [k, b, s] = grid[r * cols + c];
                writeln!(csv, "{r},{c},{k},{b},{s}").unwrap();
            }
        }
        Ok(csv)
    }
}

fn pretty<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serialises");
    s.push('\n');
    s
}

/// Chains every stage and returns the summary.
pub fn run_bench(cfg: ExperimentConfig) -> Result<BenchmarkSummary> {
    Experiment::new(cfg)?.summary()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::minimal(2);
        cfg.dataset.train_shots_per_state = 400;
        cfg.dataset.test_shots_per_state = 400;
        cfg.nn.epochs = 5;
        cfg.bayes.mc_shots = 20_000;
        cfg.sim.pipeline_shots = 200;
        cfg
    }

    #[test]
    fn stages_are_deterministic() {
        let a = Experiment::new(small()).unwrap().artifacts(Stage::Bench).unwrap();
        let b = Experiment::new(small()).unwrap().artifacts(Stage::Bench).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            if x.name != "summary.json" {
                assert_eq!(x, y, "{} differs", x.name);
            }
        }
    }

    #[test]
    fn summary_matches_stage_reports() {
        let mut e = Experiment::new(small()).unwrap();
        let s = e.summary().unwrap();
        assert_eq!(s.kernel_ns, 81.6);
        assert_eq!(s.kernel_cycles, 102);
        assert_eq!(s.power.total_w, 0.593);
        assert!(s.kernel_matches_scalar);
        let eval = e.eval().unwrap();
        assert_eq!(s.fidelity["lda"], eval.confusion["lda"].fidelity());
        assert_eq!(s.fidelity.len(), 4);
        assert_eq!(s.bayes_method, crate::discriminators::BayesMethod::Analytic);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut seq = small();
        seq.execution = Execution::Sequential;
        let a = run_bench(small()).unwrap().without_timestamp();
        let b = run_bench(seq).unwrap().without_timestamp();
        assert_eq!(a.fidelity, b.fidelity);
        assert_eq!(a.bayes_mc_error, b.bayes_mc_error);
        assert_eq!(a.provenance.test_fingerprint, b.provenance.test_fingerprint);
    }

    #[test]
    fn trace_mode_runs_end_to_end() {
        let mut cfg = small();
        cfg.dataset.mode = ShotMode::Trace { samples: 4, sample_period_ns: 2.0 };
        let mut e = Experiment::new(cfg).unwrap();
        assert_eq!(e.network_dims(), [8, 8, 8, 2]);
        let names: Vec<String> = e.artifacts(Stage::Gen).unwrap().into_iter().map(|a| a.name).collect();
        assert_eq!(names, ["train.bin", "test.bin"]);
        let s = e.summary().unwrap();
        assert!(s.kernel_matches_scalar);
        assert!(s.fidelity["lda"] > 0.9);
    }

    #[test]
    fn report_csvs_have_expected_shape() {
        let mut e = Experiment::new(small()).unwrap();
        let grid = e.placement_grid_csv().unwrap();
        assert_eq!(grid.lines().count(), 1 + 9 * 50);
        assert_eq!(grid.lines().filter(|l| l.ends_with(",1,0,0") || l.contains(",1,1,")).count(), 1);
        let timeline = e.timeline_csv().unwrap();
        assert_eq!(timeline.lines().count(), 1 + 1 + 8 * 4);
        assert!(timeline.lines().nth(1).unwrap().starts_with("init,,0,1000"));
        assert_eq!(e.iq_scatter_csv().unwrap().lines().count(), 801);
    }
}
