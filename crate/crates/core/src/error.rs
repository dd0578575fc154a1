use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("model validation error: {0}")]
    ModelValidation(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate}): loss is not finite")]
    TrainingDivergence { epoch: usize, learning_rate: f64 },

    #[error("quantization error: layer {layer} {kind} value {value} does not fit Q{int_bits}.{fractional_bits}")]
    Quantization {
        layer: usize,
        kind: &'static str,
        value: f64,
        int_bits: u32,
        fractional_bits: u32,
    },

    #[error("placement error: {0}")]
    Placement(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by user-supplied configuration rather than runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::ModelValidation(_) | Error::Unsupported(_))
    }
}
