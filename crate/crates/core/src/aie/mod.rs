//! Cycle-level model of a tiled vector accelerator running the fixed-point network.
//!
//! The flow is: [`map_to_schedule`] lowers a [`QuantizedMlp`](crate::nn::QuantizedMlp)
//! into lane-chunked vector ops with per-op cycle costs from a
//! [`CalibrationProfile`]; [`simulate_kernel`] executes that schedule bit-exactly;
//! [`simulate_pipeline`] runs the MM2S → kernel → S2MM streaming pipeline as a
//! discrete-event simulation; [`compute_utilization`] and [`estimate_power`] produce
//! the resource and power reports.

mod config;
mod kernel;
mod pipeline;
mod placement;
mod power;
mod schedule;

use serde::{Deserialize, Serialize};

pub use config::{CalibrationProfile, StageConfig, StreamPipelineConfig, TileArrayConfig, REFERENCE_PROFILE};
pub use kernel::{simulate_kernel, KernelRun};
pub use pipeline::{STAGE_NAMES, simulate_pipeline, simulate_stages, LatencyReport, PipelineRun, ShotSpan};
pub use placement::{compute_utilization, is_contiguous, PlacementEntry, TileRole, UtilizationReport};
pub use power::{estimate_power, PowerEstimate};
pub use schedule::{map_to_schedule, BufferId, KernelSchedule, TilesUsed, VectorOp, VectorOpKind, MAX_BUFFER_TILES};

/// `cycles / clock_hz` in nanoseconds, computed as `(cycles · 1e9) / clock_hz` so that
/// exact decimal results (102 cycles at 1.25 GHz = 81.6 ns) round correctly.
pub fn cycles_to_ns(cycles: u64, clock_hz: f64) -> f64 {
    cycles as f64 * 1e9 / clock_hz
}

/// The three accelerator reports under their fixed JSON field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub latency_report: LatencyReport,
    pub utilization_report: UtilizationReport,
    pub power_estimate: PowerEstimate,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise")
    }
}
