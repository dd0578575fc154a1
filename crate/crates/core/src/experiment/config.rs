use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aie::{CalibrationProfile, StreamPipelineConfig, TileArrayConfig, REFERENCE_PROFILE};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::Mat2;
use crate::nn::{TrainConfig, DEFAULT_FRACTIONAL_BITS};
use crate::signal::{GaussianStateModel, IqPoint, ShotMode, StateCluster};

/// Separation between neighbouring default clusters, in units of their (unit) spread.
pub const DEFAULT_SEPARATION: f64 = 4.34;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminatorKind {
    Lda,
    Qda,
    /// Floating-point network.
    Nn,
    /// The same network after fixed-point quantisation.
    NnFixed,
}

impl DiscriminatorKind {
    pub const ALL: [DiscriminatorKind; 4] =
        [DiscriminatorKind::Lda, DiscriminatorKind::Qda, DiscriminatorKind::Nn, DiscriminatorKind::NnFixed];

    pub fn as_str(self) -> &'static str {
        match self {
            DiscriminatorKind::Lda => "lda",
            DiscriminatorKind::Qda => "qda",
            DiscriminatorKind::Nn => "nn",
            DiscriminatorKind::NnFixed => "nn_fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub train_shots_per_state: usize,
    pub test_shots_per_state: usize,
    pub mode: ShotMode,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { train_shots_per_state: 5_000, test_shots_per_state: 10_000, mode: ShotMode::Integrated }
    }
}

/// Network shape and SGD settings. The shuffle and init seeds are derived from the
/// top-level seed, so they are not configurable here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NnConfig {
    pub hidden: [usize; 2],
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_init_scale: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        NnConfig {
            hidden: [8, 8],
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            weight_init_scale: t.weight_init_scale,
        }
    }
}

impl NnConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            weight_init_scale: self.weight_init_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizationConfig {
    pub fractional_bits: u32,
}

impl Default for QuantizationConfig {
    fn default() -> Self {
        QuantizationConfig { fractional_bits: DEFAULT_FRACTIONAL_BITS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BayesConfig {
    pub mc_shots: u64,
}

impl Default for BayesConfig {
    fn default() -> Self {
        BayesConfig { mc_shots: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Shots pushed through the streaming pipeline model.
    pub pipeline_shots: usize,
    /// Shots drawn in the timeline plot data.
    pub timeline_shots: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { pipeline_shots: 10_000, timeline_shots: 8 }
    }
}

/// Everything one experiment run needs. Only `d` is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default = "default_discriminators")]
    pub discriminators: Vec<DiscriminatorKind>,
    #[serde(default)]
    pub execution: Execution,
    /// Per-state clusters; when absent, `d` unit-variance clusters on a circle with
    /// neighbouring means [`DEFAULT_SEPARATION`] apart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<StateCluster>>,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub nn: NnConfig,
    #[serde(default)]
    pub quantization: QuantizationConfig,
    #[serde(default)]
    pub bayes: BayesConfig,
    #[serde(default)]
    pub array: TileArrayConfig,
    #[serde(default)]
    pub pipeline: StreamPipelineConfig,
    #[serde(default)]
    pub sim: SimConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_profile() -> String {
    REFERENCE_PROFILE.to_string()
}

fn default_discriminators() -> Vec<DiscriminatorKind> {
    DiscriminatorKind::ALL.to_vec()
}

/// `d` unit-covariance, equal-prior clusters evenly spaced on a circle centred at the
/// origin, adjacent means `separation` apart. For `d = 2` the means are `(∓separation/2, 0)`.
pub fn default_state_model(d: usize, separation: f64) -> Result<GaussianStateModel> {
    if d < 2 {
        return Err(Error::Config(format!("d: system dimension must be >= 2, got {d}")));
    }
    let radius = separation / (2.0 * (std::f64::consts::PI / d as f64).sin());
    let clean = |v: f64| if v.abs() < 1e-12 * radius { 0.0 } else { v };
    let means: Vec<IqPoint> = (0..d)
        .map(|s| {
            let angle = std::f64::consts::PI * (1.0 + 2.0 * s as f64 / d as f64);
            IqPoint { i: clean(radius * angle.cos()), q: clean(radius * angle.sin()) }
        })
        .collect();
    GaussianStateModel::isotropic(&means, Mat2::IDENTITY)
}

impl ExperimentConfig {
    pub fn minimal(d: usize) -> Self {
        ExperimentConfig {
            d,
            seed: 0,
            out_dir: default_out_dir(),
            profile: default_profile(),
            discriminators: default_discriminators(),
            execution: Execution::default(),
            states: None,
            dataset: DatasetConfig::default(),
            nn: NnConfig::default(),
            quantization: QuantizationConfig::default(),
            bayes: BayesConfig::default(),
            array: TileArrayConfig::default(),
            pipeline: StreamPipelineConfig::default(),
            sim: SimConfig::default(),
        }
    }

    pub fn state_model(&self) -> Result<GaussianStateModel> {
        match &self.states {
            None => default_state_model(self.d, DEFAULT_SEPARATION),
            Some(states) => {
                if states.len() != self.d {
                    return Err(Error::Config(format!("states: {} clusters given for d = {}", states.len(), self.d)));
                }
                GaussianStateModel::new(states.clone()).map_err(|e| Error::Config(format!("states: {e}")))
            }
        }
    }

    pub fn calibration(&self) -> Result<CalibrationProfile> {
        CalibrationProfile::named(&self.profile).map_err(|e| Error::Config(format!("profile: {e}")))
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        self.nn.train_config(seed)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.d < 2 {
            return cfg(format!("d: system dimension must be >= 2, got {}", self.d));
        }
        self.state_model()?;
        if self.dataset.train_shots_per_state < 3 {
            return cfg("dataset.train_shots_per_state: must be >= 3".into());
        }
        if self.dataset.test_shots_per_state < 1 {
            return cfg("dataset.test_shots_per_state: must be >= 1".into());
        }
        if let ShotMode::Trace { samples, sample_period_ns } = self.dataset.mode {
            if samples == 0 {
                return cfg("dataset.mode.samples: must be >= 1".into());
            }
            if !(sample_period_ns > 0.0 && sample_period_ns.is_finite()) {
                return cfg("dataset.mode.sample_period_ns: must be > 0".into());
            }
        }
        if self.discriminators.is_empty() {
            return cfg("discriminators: at least one discriminator is required".into());
        }
        let mut sorted = self.discriminators.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.discriminators.len() {
            return cfg("discriminators: duplicate entries".into());
        }
        if self.nn.hidden.contains(&0) {
            return cfg("nn.hidden: layer widths must be >= 1".into());
        }
        if self.nn.epochs == 0 {
            return cfg("nn.epochs: must be >= 1".into());
        }
        self.train_config(0).validate().map_err(|e| Error::Config(format!("nn.{e}")))?;
        if self.quantization.fractional_bits > 15 {
            return cfg(format!("quantization.fractional_bits: must be <= 15, got {}", self.quantization.fractional_bits));
        }
        if self.bayes.mc_shots < 1000 {
            return cfg("bayes.mc_shots: must be >= 1000".into());
        }
        if self.sim.pipeline_shots == 0 {
            return cfg("sim.pipeline_shots: must be >= 1".into());
        }
        self.array.validate()?;
        self.pipeline.validate()?;
        self.calibration()?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("cannot serialise config: {e}")))
    }

    /// SHA-256 of the canonical JSON form (keys sorted). Field order in the source
    /// file is irrelevant, and so are `out_dir` and `execution`, which cannot change
    /// any result.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serialises");
        if let Some(map) = value.as_object_mut() {
            map.remove("out_dir");
            map.remove("execution");
        }
        let json = serde_json::to_string(&value).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Strict parse of a TOML experiment config. Errors name the offending key and its line.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let detail = e.message().trim().to_string();
        let Some(span) = e.span() else {
            return Error::Config(detail);
        };
        let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
        let line_text = text.lines().nth(line - 1).unwrap_or("");
        let key = line_text.split('=').next().unwrap_or("").trim().trim_matches(['[', ']']);
        if key.is_empty() {
            Error::Config(format!("line {line}: {detail}"))
        } else {
            Error::Config(format!("line {line}: key `{key}`: {detail}"))
        }
    })?;
    cfg.validate().map_err(|e| match e {
        Error::Config(msg) => {
            let key_path = msg.split(':').next().unwrap_or("");
            match locate_key(text, key_path) {
                Some(line) => Error::Config(format!("line {line}: {msg}")),
                None => Error::Config(msg),
            }
        }
        other => other,
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// First line defining the last component of a dotted key, if any.
fn locate_key(text: &str, dotted: &str) -> Option<usize> {
    let leaf = dotted.rsplit('.').next()?.trim();
    if leaf.is_empty() || leaf.contains(' ') {
        return None;
    }
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(leaf).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}
