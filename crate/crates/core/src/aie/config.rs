use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the shipped calibration profile fitted to the 102-cycle reference kernel.
pub const REFERENCE_PROFILE: &str = "vck190-ref";

/// Geometry of the accelerator array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TileArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub local_mem_bytes: usize,
    pub mem_banks: usize,
    /// 16-bit MAC lanes per vector op.
    pub vector_lanes: usize,
    pub gmio_in: usize,
    pub gmio_out: usize,
    pub clock_hz: f64,
}

impl Default for TileArrayConfig {
    fn default() -> Self {
        TileArrayConfig {
            rows: 8,
            cols: 50,
            local_mem_bytes: 32 * 1024,
            mem_banks: 8,
            vector_lanes: 16,
            gmio_in: 32,
            gmio_out: 32,
            clock_hz: 1.25e9,
        }
    }
}

impl TileArrayConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("rows", self.rows),
            ("cols", self.cols),
            ("local_mem_bytes", self.local_mem_bytes),
            ("mem_banks", self.mem_banks),
            ("vector_lanes", self.vector_lanes),
            ("gmio_in", self.gmio_in),
            ("gmio_out", self.gmio_out),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("array.{name} must be positive")));
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(Error::Config(format!("array.clock_hz must be > 0, got {}", self.clock_hz)));
        }
        Ok(())
    }

    /// Compute (and memory) tiles: `rows × cols`.
    pub fn total_tiles(&self) -> usize {
        self.rows * self.cols
    }

    /// Stream switches, one per array tile plus one per interface tile in the row
    /// below the array: `(rows + 1) × cols`.
    pub fn stream_switches(&self) -> usize {
        (self.rows + 1) * self.cols
    }
}

/// Fitted per-op cycle costs and power coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationProfile {
    pub name: String,
    pub cycles_per_vector_mac_group: u64,
    pub cycles_per_relu_vector: u64,
    pub cycles_per_load_store_vector: u64,
    pub kernel_overhead_cycles: u64,
    /// Core power per active kernel tile, W.
    pub core_power_w_per_kernel: f64,
    /// Memory power at the reference traffic, W.
    pub memory_power_w_at_reference: f64,
    /// Bytes moved per kernel invocation that correspond to `memory_power_w_at_reference`.
    pub reference_memory_traffic_bytes: u64,
}

impl CalibrationProfile {
    /// Reference profile.
    ///
    /// Fit: the `[2, 8, 8, 2]` network at 16 lanes lowers to 18 MAC groups
    /// (2 cycles each), 2 ReLU vectors (1 cycle) and 6 loads/stores (1 cycle), i.e.
    /// 44 compute cycles. The measured kernel is 81.6 ns at 1.25 GHz = 102 cycles, so
    /// `kernel_overhead_cycles = 102 − 44 = 58`. Power: 0.092 W per kernel core and
    /// 0.501 W memory at that kernel's 300 bytes of traffic per invocation.
    pub fn vck190_reference() -> Self {
        CalibrationProfile {
            name: REFERENCE_PROFILE.into(),
            cycles_per_vector_mac_group: 2,
            cycles_per_relu_vector: 1,
            cycles_per_load_store_vector: 1,
            kernel_overhead_cycles: 58,
            core_power_w_per_kernel: 0.092,
            memory_power_w_at_reference: 0.501,
            reference_memory_traffic_bytes: 300,
        }
    }

    /// All costs zero; isolates schedule structure in tests.
    pub fn zero_cost() -> Self {
        CalibrationProfile {
            name: "zero-cost".into(),
            cycles_per_vector_mac_group: 0,
            cycles_per_relu_vector: 0,
            cycles_per_load_store_vector: 0,
            kernel_overhead_cycles: 0,
            core_power_w_per_kernel: 0.0,
            memory_power_w_at_reference: 0.0,
            reference_memory_traffic_bytes: 1,
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            REFERENCE_PROFILE => Ok(Self::vck190_reference()),
            "zero-cost" => Ok(Self::zero_cost()),
            other => Err(Error::Config(format!(
                "unknown calibration profile `{other}` (known: {REFERENCE_PROFILE}, zero-cost)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.core_power_w_per_kernel >= 0.0 && self.memory_power_w_at_reference >= 0.0) {
            return Err(Error::Config("calibration power coefficients must be >= 0".into()));
        }
        if self.reference_memory_traffic_bytes == 0 {
            return Err(Error::Config("reference_memory_traffic_bytes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    /// Cycles per shot.
    pub latency_cycles: u64,
    /// Depth, in shots, of the FIFO feeding this stage.
    pub fifo_depth: usize,
}

/// MM2S → kernel → S2MM streaming pipeline driven by the `main` control loop.
///
/// `init_cycles` and `main_overhead_cycles` are placeholders: the measured timeline
/// shows these phases without tabulating them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamPipelineConfig {
    pub mm2s: StageConfig,
    /// Input FIFO of the kernel stage. Its latency comes from the kernel schedule.
    pub kernel_fifo_depth: usize,
    pub s2mm: StageConfig,
    pub main_overhead_cycles: u64,
    pub init_cycles: u64,
    pub overlap_enabled: bool,
}

impl Default for StreamPipelineConfig {
    fn default() -> Self {
        StreamPipelineConfig {
            mm2s: StageConfig { latency_cycles: 10, fifo_depth: 4 },
            kernel_fifo_depth: 4,
            s2mm: StageConfig { latency_cycles: 10, fifo_depth: 4 },
            main_overhead_cycles: 500,
            init_cycles: 1250,
            overlap_enabled: true,
        }
    }
}

impl StreamPipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, depth) in
            [("mm2s", self.mm2s.fifo_depth), ("kernel", self.kernel_fifo_depth), ("s2mm", self.s2mm.fifo_depth)]
        {
            if depth == 0 {
                return Err(Error::Config(format!("pipeline.{name} FIFO depth must be >= 1")));
            }
        }
        for (name, lat) in [("mm2s", self.mm2s.latency_cycles), ("s2mm", self.s2mm.latency_cycles)] {
            if lat == 0 {
                return Err(Error::Config(format!("pipeline.{name} latency must be >= 1 cycle")));
            }
        }
        Ok(())
    }
}
