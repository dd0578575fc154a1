use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qsd_core::experiment::{load_config, Artifact, Experiment, ExperimentConfig, Stage};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Qubit readout discrimination: data generation, training, evaluation and
/// accelerator simulation from one config file.
#[derive(Parser)]
#[command(name = "qsd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Top-level seed; overrides `seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Calibration profile; overrides `profile`.
    #[arg(long, global = true, value_name = "NAME")]
    profile: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write train/test datasets.
    Gen,
    /// Train the floating-point network.
    Train,
    /// Quantise the trained network to fixed point.
    Quantize,
    /// Confusion matrices for every discriminator plus the Bayes bound.
    Eval,
    /// Latency, utilisation and power reports of the accelerator model.
    Sim,
    /// All of the above plus summary.json.
    Bench,
    /// Plot data: IQ scatter, timeline bars, placement grid.
    Report,
}

impl Command {
    fn stage(self) -> Stage {
        match self {
            Command::Gen => Stage::Gen,
            Command::Train => Stage::Train,
            Command::Quantize => Stage::Quantize,
            Command::Eval => Stage::Eval,
            Command::Sim => Stage::Sim,
            Command::Bench => Stage::Bench,
            Command::Report => Stage::Report,
        }
    }
}

/// Marker for failures that are the caller's fault (exit code 2).
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    if err.downcast_ref::<ConfigError>().is_some() {
        return ("config", EXIT_CONFIG);
    }
    match err.downcast_ref::<qsd_core::Error>() {
        Some(e) if e.is_config() => ("config", EXIT_CONFIG),
        _ => ("runtime", EXIT_RUNTIME),
    }
}

fn fail(kind: &str, code: u8, message: &str) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "exit_code": code, "message": message });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn resolve_config(common: &Common) -> Result<ExperimentConfig> {
    let path = common.config.as_ref().ok_or_else(|| ConfigError("--config <PATH> is required".into()))?;
    let mut cfg = load_config(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(profile) = &common.profile {
        cfg.profile = profile.clone();
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn partial_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.partial"))
}

/// Write every artifact under a `.partial` name, then rename them all. If any step
/// fails, files already renamed are moved back, so only `.partial` files remain.
fn commit(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for a in artifacts {
        let tmp = partial_path(dir, &a.name);
        fs::write(&tmp, &a.bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    }
    let mut written: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let (tmp, dst) = (partial_path(dir, &a.name), dir.join(&a.name));
        if let Err(e) = fs::rename(&tmp, &dst) {
            for (tmp, dst) in written.iter().rev() {
                if let Err(undo) = fs::rename(dst, tmp) {
                    log::error!("cannot move {} back: {undo}", dst.display());
                }
            }
            return Err(e).with_context(|| format!("cannot finalise {}", dst.display()));
        }
        written.push((tmp, dst));
    }
    Ok(written.into_iter().map(|(_, dst)| dst).collect())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.common)?;
    let out_dir = cfg.out_dir.clone();
    let mut experiment = Experiment::new(cfg)?;
    let mut artifacts = experiment.artifacts(cli.command.stage())?;
    if matches!(cli.command, Command::Bench) {
        let resolved = experiment.config().to_toml()?;
        artifacts.push(Artifact { name: "config.resolved.toml".into(), bytes: resolved.into_bytes() });
    }
    for path in commit(&out_dir, &artifacts)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QSD_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail("usage", EXIT_CONFIG, first);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, code) = classify(&err);
            let message = format!("{err:#}").replace('\n', " ");
            fail(kind, code, &message)
        }
    }
}
