//! Real-time qubit readout discrimination toolkit.
//!
//! The crate is organised around the readout pipeline:
//!
//! - [`signal`]: synthetic IQ-plane readout data (Gaussian state clusters, raw traces).
//! - [`discriminators`]: LDA, QDA, the Bayes-optimal error bound and confusion matrices.
//! - [`nn`]: the 3-layer ReLU network, its SGD trainer and the 16-bit fixed-point path.
//! - [`aie`]: a cycle-level model of a tiled vector accelerator running the fixed-point network.
//! - [`experiment`]: declarative experiment configs and the end-to-end benchmark driver.
//!
//! Data-parallel loops (shot generation, evaluation, Monte Carlo, batch kernel
//! simulation) go through [`exec::Execution`]. With the `parallel` feature (default)
//! they run on rayon; without it every mode falls back to the sequential path.
//! Results are identical in both modes.

pub mod aie;
pub mod discriminators;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod signal;

pub use error::{Error, Result};
pub use exec::Execution;
