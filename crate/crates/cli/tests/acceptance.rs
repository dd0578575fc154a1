//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the report is printed even when every
//! criterion passes.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use qsd_core::aie::{
    compute_utilization, estimate_power, map_to_schedule, simulate_kernel, simulate_stages, CalibrationProfile,
    KernelSchedule, StreamPipelineConfig, TileArrayConfig,
};
use qsd_core::discriminators::{
    argmax, evaluate, fit_lda, fit_qda, Classifier, FitOptions, QdaCovariance,
};
use qsd_core::experiment::{load_config, BenchmarkSummary, Experiment, ExperimentConfig};
use qsd_core::linalg::Mat2;
use qsd_core::nn::{
    backprop_gradients, cross_entropy_loss, forward_fixed_scalar, quantize_input, quantize_model, MlpModel,
    QuantizedMlp,
};
use qsd_core::rng;
use qsd_core::signal::{generate_shots, GaussianStateModel, IqPoint, ShotMode, StateCluster};
use qsd_core::Execution;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:.0?}"))?;
    Ok(took)
}

fn reference_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml")
}

fn reference_config() -> ExperimentConfig {
    load_config(&reference_config_path()).expect("reference config parses")
}

/// The reference [2, 8, 8, 2] network in Q3.12. Weights do not affect the schedule.
fn reference_network() -> QuantizedMlp {
    quantize_model(&MlpModel::init(&[2, 8, 8, 2], 7, 1.0).unwrap(), 12).unwrap()
}

fn reference_schedule() -> KernelSchedule {
    map_to_schedule(&reference_network(), &TileArrayConfig::default(), &CalibrationProfile::vck190_reference()).unwrap()
}

fn qsd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qsd"))
}

fn criterion_1_kernel_latency() -> Outcome {
    let s = reference_schedule();
    let run = simulate_kernel(&s, &[quantize_input(&[0.3, -1.2], 12)], Execution::Sequential).map_err(|e| e.to_string())?;
    ensure(s.total_cycles == 102, || format!("total_cycles {}", s.total_cycles))?;
    ensure(run.kernel_ns == [81.6], || format!("kernel_ns {:?}", run.kernel_ns))?;
    // the same number from the CLI `sim` subcommand on the shipped config
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let output = qsd()
        .args(["sim", "--config"])
        .arg(reference_config_path())
        .arg("--out")
        .arg(tmp.path())
        .output()
        .map_err(|e| e.to_string())?;
    let took = within(Duration::from_secs(1), start)?;
    ensure(output.status.success(), || String::from_utf8_lossy(&output.stderr).into_owned())?;
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("sim_report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let ns = report["latency_report"]["kernel_ns"].as_f64();
    ensure(ns == Some(81.6), || format!("sim_report kernel_ns {ns:?}"))?;
    Ok(format!("102 cycles = 81.6 ns at 1.25 GHz; `qsd sim` on the reference config in {took:.2?}"))
}

fn criterion_2_utilization() -> Outcome {
    let array = TileArrayConfig::default();
    let u = compute_utilization(&reference_schedule(), &array).map_err(|e| e.to_string())?;
    ensure(u.kernel_tile_pct == 0.25, || format!("kernel {}", u.kernel_tile_pct))?;
    ensure(u.buffer_tile_pct == 0.5, || format!("buffer {}", u.buffer_tile_pct))?;
    // documented stream denominator: (rows + 1) × cols switches
    let expected_stream = 100.0 * 2.0 / ((array.rows + 1) * array.cols) as f64;
    ensure(u.stream_tile_pct == expected_stream, || format!("stream {}", u.stream_tile_pct))?;
    Ok(format!("kernel 0.25%, buffer 0.50%, stream {:.2}% of {} switches", u.stream_tile_pct, u.total_stream_switches))
}

fn criterion_3_power() -> Outcome {
    let s = reference_schedule();
    let u = compute_utilization(&s, &TileArrayConfig::default()).map_err(|e| e.to_string())?;
    let p = estimate_power(&u, &s, &CalibrationProfile::vck190_reference());
    ensure((p.core_w, p.memory_w, p.total_w) == (0.092, 0.501, 0.593), || format!("{p:?}"))?;
    Ok("core 0.092 W + memory 0.501 W = 0.593 W".into())
}

fn criterion_4_fidelity() -> Outcome {
    let mut cfg = reference_config();
    cfg.execution = Execution::Sequential;
    let test_shots = cfg.dataset.test_shots_per_state * cfg.d;
    ensure(test_shots == 20_000, || format!("reference config holds out {test_shots} shots"))?;
    let start = Instant::now();
    let mut e = Experiment::new(cfg).map_err(|e| e.to_string())?;
    let eval = e.eval().map_err(|e| e.to_string())?.clone();
    let took = within(Duration::from_secs(120), start)?;
    let mc = eval.bayes.monte_carlo.error_probability;
    ensure((mc - 0.015).abs() < 0.001, || format!("Monte Carlo Bayes error {mc}"))?;
    let f = eval.confusion["nn_fixed"].fidelity();
    ensure((f - 0.985).abs() <= 0.005, || format!("quantized NN fidelity {f}"))?;
    Ok(format!("quantized NN {:.4} on {test_shots} held-out shots, Bayes {:.4}, {took:.1?} single-threaded", f, mc))
}

fn criterion_5_constant_latency() -> Outcome {
    let s = reference_schedule();
    let mut r = rng::stream(5, 0);
    let mut batches: Vec<Vec<Vec<i16>>> = Vec::new();
    for n in [1usize, 10, 10_000] {
        batches.push((0..n).map(|_| vec![r.gen::<i16>(), r.gen::<i16>()]).collect());
        batches.push((0..n).map(|_| quantize_input(&[r.gen_range(-0.1..0.1), 0.0], 12)).collect());
        batches.push(vec![vec![i16::MAX, i16::MIN]; n]);
        batches.push(vec![vec![0, 0]; n]);
    }
    for b in &batches {
        let run = simulate_kernel(&s, b, Execution::Parallel).map_err(|e| e.to_string())?;
        ensure(run.kernel_ns.iter().all(|&ns| ns == 81.6), || format!("batch of {} varied", b.len()))?;
    }
    Ok(format!("81.6 ns on {} batches of sizes 1, 10, 10^4 and four input distributions", batches.len()))
}

/// Independent big-integer evaluation of the fixed-point network.
fn bigint_logits(q: &QuantizedMlp, x: &[i16]) -> Vec<i64> {
    let f = q.fractional_bits;
    let mut act: Vec<BigInt> = x.iter().map(|&v| BigInt::from(v)).collect();
    for (l, layer) in q.layers.iter().enumerate() {
        act = (0..layer.outputs)
            .map(|row| {
                let mut acc = BigInt::from(layer.biases[row]) * (BigInt::from(1) << f);
                for c in 0..layer.inputs {
                    acc += BigInt::from(layer.weights[row * layer.inputs + c]) * &act[c];
                }
                // floor((acc + 2^(s-1)) / 2^s), then clamp
                let s = layer.shift;
                let half = if s == 0 { BigInt::from(0) } else { BigInt::from(1) << (s - 1) };
                let num = acc + half;
                let den = BigInt::from(1) << s;
                let mut v = num.clone() / &den;
                if num < BigInt::from(0) && v.clone() * &den != num {
                    v -= 1;
                }
                let v = v.clamp(BigInt::from(i16::MIN), BigInt::from(i16::MAX));
                if l < 2 && v < BigInt::from(0) {
                    BigInt::from(0)
                } else {
                    v
                }
            })
            .collect();
    }
    act.iter().map(|v| i64::try_from(v).unwrap()).collect()
}

fn random_network(seed: u64) -> QuantizedMlp {
    let mut r = rng::stream(seed, 1);
    let dims = [r.gen_range(2..20), r.gen_range(1..40), r.gen_range(1..40), r.gen_range(2..6)];
    let mut m = MlpModel::init(&dims, seed, r.gen_range(0.5..3.0)).unwrap();
    for layer in m.layers_mut() {
        layer.biases.iter_mut().for_each(|b| *b = r.gen_range(-2.0..2.0));
    }
    quantize_model(&m, r.gen_range(8..14)).unwrap()
}

fn criterion_6_oracle_equivalence() -> Outcome {
    for seed in 0..10u64 {
        let q = random_network(seed);
        let mut r = rng::stream(seed, 2);
        let inputs: Vec<Vec<i16>> = (0..10_000).map(|_| (0..q.dims[0]).map(|_| r.gen()).collect()).collect();
        for lanes in [16, 5] {
            let array = TileArrayConfig { vector_lanes: lanes, ..TileArrayConfig::default() };
            let s = map_to_schedule(&q, &array, &CalibrationProfile::vck190_reference()).map_err(|e| e.to_string())?;
            let run = simulate_kernel(&s, &inputs, Execution::Parallel).map_err(|e| e.to_string())?;
            for (x, label) in inputs.iter().zip(&run.labels) {
                let scalar = forward_fixed_scalar(&q, x).map_err(|e| e.to_string())?;
                ensure(argmax(&scalar.logits) == label.0, || format!("model {seed}, lanes {lanes}: label mismatch on {x:?}"))?;
            }
        }
    }
    let mut cases = 0;
    for seed in 0..10u64 {
        let q = random_network(100 + seed);
        let mut r = rng::stream(seed, 3);
        for _ in 0..100 {
            let x: Vec<i16> = (0..q.dims[0]).map(|_| r.gen()).collect();
            let scalar: Vec<i64> = forward_fixed_scalar(&q, &x).unwrap().logits.iter().map(|&v| v as i64).collect();
            ensure(scalar == bigint_logits(&q, &x), || format!("big-integer mismatch on model {seed}, input {x:?}"))?;
            cases += 1;
        }
    }
    Ok(format!("kernel = scalar on 10 models x 10^4 shots (16 and 5 lanes); scalar = big-int on {cases} cases"))
}

fn criterion_7_gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut model = MlpModel::init(&[2, 8, 8, 2], seed, 1.5).unwrap();
        let mut r = rng::stream(seed, 4);
        for layer in model.layers_mut() {
            layer.biases.iter_mut().for_each(|b| *b = r.gen_range(-0.5..0.5));
        }
        let batch: Vec<(Vec<f64>, usize)> =
            (0..32).map(|_| (vec![r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)], r.gen_range(0..2))).collect();
        let g = backprop_gradients(&model, &batch).map_err(|e| e.to_string())?;
        let h = 1e-5;
        for l in 0..3 {
            let nw = model.layers()[l].weights.len();
            for k in 0..nw + model.layers()[l].biases.len() {
                let loss_at = |delta: f64| {
                    let mut m = model.clone();
                    let layer = &mut m.layers_mut()[l];
                    if k < nw {
                        layer.weights[k] += delta;
                    } else {
                        layer.biases[k - nw] += delta;
                    }
                    cross_entropy_loss(&m, &batch).unwrap()
                };
                let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
                let analytic = if k < nw { g.layers[l].weights[k] } else { g.layers[l].biases[k - nw] };
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.2e} over 10 seeded models"))
}

fn unequal_covariance_model() -> GaussianStateModel {
    GaussianStateModel::new(vec![
        StateCluster { mean: IqPoint { i: 0.0, q: 0.0 }, covariance: Mat2::IDENTITY.scaled(0.25), prior: 0.5 },
        StateCluster { mean: IqPoint { i: 0.5, q: 0.0 }, covariance: Mat2::IDENTITY.scaled(4.0), prior: 0.5 },
    ])
    .unwrap()
}

fn criterion_8_degeneracy_and_dominance() -> Outcome {
    let exec = Execution::Parallel;
    // forced-equal covariances
    let shared = GaussianStateModel::isotropic(
        &[IqPoint { i: -1.0, q: 0.3 }, IqPoint { i: 1.2, q: -0.4 }, IqPoint { i: 0.1, q: 1.5 }],
        Mat2([[1.0, 0.3], [0.3, 0.7]]),
    )
    .unwrap();
    let train = generate_shots(&shared, 2_000, 11, ShotMode::Integrated, exec).map_err(|e| e.to_string())?;
    let test = generate_shots(&shared, 5_000, 12, ShotMode::Integrated, exec).map_err(|e| e.to_string())?;
    let lda = fit_lda(&train, &FitOptions::default()).map_err(|e| e.to_string())?;
    let qda = fit_qda(&train, &FitOptions::default(), QdaCovariance::Pooled).map_err(|e| e.to_string())?;
    for shot in test.shots() {
        let (a, b) = (lda.classify(&shot.features).unwrap(), qda.classify(&shot.features).unwrap());
        ensure(a == b, || format!("LDA {a:?} vs pooled QDA {b:?} at {:?}", shot.features))?;
    }

    // dominance on the reference fixture
    let mut e = Experiment::new(reference_config()).map_err(|e| e.to_string())?;
    let eval = e.eval().map_err(|e| e.to_string())?.clone();
    let bayes = &eval.bayes.monte_carlo;
    let mut lines = Vec::new();
    for (name, cm) in &eval.confusion {
        let err = cm.error_rate();
        let n = cm.total as f64;
        let sigma = (bayes.sigma().powi(2) + err * (1.0 - err) / n).sqrt();
        ensure(err >= bayes.error_probability - 3.0 * sigma, || {
            format!("{name} error {err} below Bayes {} - 3σ ({sigma})", bayes.error_probability)
        })?;
        lines.push(format!("{name} {err:.4}"));
    }

    // unequal covariances
    let model = unequal_covariance_model();
    let train = generate_shots(&model, 5_000, 21, ShotMode::Integrated, exec).map_err(|e| e.to_string())?;
    let test = generate_shots(&model, 5_000, 22, ShotMode::Integrated, exec).map_err(|e| e.to_string())?;
    let fq = evaluate(&fit_qda(&train, &FitOptions::default(), QdaCovariance::PerState).unwrap(), &test, exec).unwrap().fidelity();
    let fl = evaluate(&fit_lda(&train, &FitOptions::default()).unwrap(), &test, exec).unwrap().fidelity();
    ensure(fq - fl >= 0.05, || format!("QDA {fq} vs LDA {fl}"))?;
    Ok(format!(
        "pooled QDA = LDA on {} shots; errors [{}] >= Bayes {:.4} - 3σ; QDA - LDA = {:.1} pp",
        test.len(),
        lines.join(", "),
        bayes.error_probability,
        100.0 * (fq - fl)
    ))
}

fn criterion_9_pipeline_laws() -> Outcome {
    let clock = 1.25e9;
    let shots = 10_000;
    let mut checked = 0;
    for (mm2s, kernel, s2mm, depth) in [(10, 102, 10, 4), (150, 102, 10, 1), (10, 102, 300, 2), (7, 3, 5, 8)] {
        let mut cfg = StreamPipelineConfig::default();
        cfg.mm2s.latency_cycles = mm2s;
        cfg.s2mm.latency_cycles = s2mm;
        cfg.mm2s.fifo_depth = depth;
        cfg.kernel_fifo_depth = depth;
        cfg.s2mm.fifo_depth = depth;
        for overlap in [true, false] {
            cfg.overlap_enabled = overlap;
            let run = simulate_stages(&cfg, kernel, clock, shots).map_err(|e| e.to_string())?;
            ensure(run.shots_in() == shots && run.shots_out() == shots, || "shots lost".into())?;
            ensure(run.exit_order.iter().copied().eq(0..shots), || "output order differs from input order".into())?;
            for k in 0..3 {
                ensure(run.max_fifo_occupancy[k] <= run.fifo_depths[k], || format!("FIFO {k} overflowed"))?;
            }
            if overlap {
                let bottleneck = mm2s.max(kernel).max(s2mm);
                let first = run.spans[0].exited;
                let last = run.spans[shots - 1].exited;
                let predicted = (last - first) as f64 / bottleneck as f64;
                ensure(((shots - 1) as f64 - predicted).abs() <= 1.0, || {
                    format!("{} shots delivered, bottleneck law predicts {predicted}", shots - 1)
                })?;
                let tput = run.report.steady_state_throughput_shots_per_s;
                let law = clock / bottleneck as f64;
                ensure((tput - law).abs() <= law / (shots - 1) as f64, || format!("throughput {tput} vs {law}"))?;
            } else {
                let per_shot = cfg.main_overhead_cycles + mm2s + kernel + s2mm;
                ensure(run.makespan_cycles == per_shot * shots as u64, || {
                    format!("makespan {} vs additive {}", run.makespan_cycles, per_shot * shots as u64)
                })?;
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} runs of 10^4 shots: conservation, order, FIFO bounds, bottleneck/additive laws"))
}

fn run_bench(out: &Path) -> Result<BenchmarkSummary, String> {
    let output = qsd()
        .args(["bench", "--config"])
        .arg(reference_config_path())
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(output.status.success(), || String::from_utf8_lossy(&output.stderr).into_owned())?;
    let bytes = std::fs::read(out.join("summary.json")).map_err(|e| e.to_string())?;
    serde_json::from_slice(&bytes).map_err(|e| e.to_string())
}

fn criterion_10_reproducibility() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let first = run_bench(a.path())?;
    let second = run_bench(b.path())?;
    let took = within(Duration::from_secs(300), start)?;
    ensure(first.without_timestamp() == second.without_timestamp(), || "summaries differ".into())?;
    ensure(first.kernel_ns == 81.6 && first.power.total_w == 0.593, || format!("{first:?}"))?;
    for name in ["train.csv", "test.csv", "mlp.json", "mlp_q.bin", "sim_report.json", "placement.csv"] {
        let x = std::fs::read(a.path().join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.path().join(name)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("two bench runs identical modulo timestamp ({took:.1?} for both)"))
}

fn main() {
    // libtest-style flags (e.g. --nocapture, filters) are accepted and ignored
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 kernel latency", criterion_1_kernel_latency),
        ("2 utilization", criterion_2_utilization),
        ("3 power", criterion_3_power),
        ("4 fidelity target", criterion_4_fidelity),
        ("5 constant latency", criterion_5_constant_latency),
        ("6 oracle equivalence", criterion_6_oracle_equivalence),
        ("7 gradient check", criterion_7_gradient_check),
        ("8 degeneracy and dominance", criterion_8_degeneracy_and_dominance),
        ("9 pipeline laws", criterion_9_pipeline_laws),
        ("10 end-to-end reproducibility", criterion_10_reproducibility),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match result {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{took:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why} [{took:.2?}]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
