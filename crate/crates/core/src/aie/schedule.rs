use serde::{Deserialize, Serialize};

use super::config::{CalibrationProfile, TileArrayConfig};
use crate::error::{Error, Result};
use crate::nn::QuantizedMlp;

/// Memory modules one kernel core can address: its own plus the east, west and
/// north neighbours (the kernel sits on the array row next to the interface tiles).
pub const MAX_BUFFER_TILES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorOpKind {
    /// Vector load of an activation chunk into the register file.
    Load,
    /// One lane-wide multiply-accumulate of a weight-row chunk against a register.
    Mac,
    /// Bias add, shift-round-saturate and store of an output chunk.
    Store,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "layer")]
pub enum BufferId {
    /// Activation buffer `k` (0 = network input, 3 = logits).
    Activation(usize),
    Weights(usize),
    Registers,
    Accumulators,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorOp {
    pub kind: VectorOpKind,
    pub layer: usize,
    /// Output row for MACs; unused (0) otherwise.
    pub row: usize,
    /// Lane chunk index within the source (load/MAC) or destination (store/ReLU) vector.
    pub chunk: usize,
    /// Active lanes in this op (the last chunk may be partial).
    pub lanes: usize,
    pub src: BufferId,
    pub dst: BufferId,
    pub cycles: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TilesUsed {
    pub kernel: usize,
    pub buffer: usize,
    pub stream: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSchedule {
    pub ops: Vec<VectorOp>,
    pub lanes: usize,
    pub compute_cycles: u64,
    pub overhead_cycles: u64,
    /// `compute_cycles + overhead_cycles`.
    pub total_cycles: u64,
    pub parameter_bytes: usize,
    /// Double-buffered input/output windows plus hidden-activation scratch.
    pub io_bytes: usize,
    pub buffer_footprint_bytes: usize,
    /// Bytes read or written per invocation (activations, weights, biases).
    pub memory_traffic_bytes: u64,
    /// Memory modules per kernel: parameter tiles then I/O tiles.
    pub parameter_buffer_tiles: usize,
    pub io_buffer_tiles: usize,
    /// Identical kernel instances placed side by side.
    pub replicas: usize,
    pub tiles_used: TilesUsed,
    pub clock_hz: f64,
    pub local_mem_bytes: usize,
    pub model: Option<QuantizedMlp>,
}

/// Stream switches on one kernel's route: the interface tile and the kernel tile.
const STREAM_SWITCHES_PER_KERNEL: usize = 2;

fn div_ceil(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Lower each layer's matrix-vector product onto `array.vector_lanes`-wide ops.
///
/// Per layer `(h_in → h_out)` with `c_in = ⌈h_in/lanes⌉`, `c_out = ⌈h_out/lanes⌉`:
/// `c_in` loads, `h_out · c_in` MAC groups, `c_out` stores and, on hidden layers,
/// `c_out` ReLU ops.
pub fn map_to_schedule(model: &QuantizedMlp, array: &TileArrayConfig, calib: &CalibrationProfile) -> Result<KernelSchedule> {
    array.validate()?;
    calib.validate()?;
    model.validate()?;
    let lanes = array.vector_lanes;
    let mut ops = Vec::new();
    let mut traffic: u64 = 0;
    for (l, layer) in model.layers.iter().enumerate() {
        let (h_in, h_out) = (layer.inputs, layer.outputs);
        let chunk_lanes = |c: usize, n: usize| lanes.min(n - c * lanes);
        for c in 0..div_ceil(h_in, lanes) {
            let active = chunk_lanes(c, h_in);
            traffic += 2 * active as u64;
            ops.push(VectorOp {
                kind: VectorOpKind::Load,
                layer: l,
                row: 0,
                chunk: c,
                lanes: active,
                src: BufferId::Activation(l),
                dst: BufferId::Registers,
                cycles: calib.cycles_per_load_store_vector,
            });
        }
        for r in 0..h_out {
            for c in 0..div_ceil(h_in, lanes) {
                let active = chunk_lanes(c, h_in);
                traffic += 2 * active as u64;
                ops.push(VectorOp {
                    kind: VectorOpKind::Mac,
                    layer: l,
                    row: r,
                    chunk: c,
                    lanes: active,
                    src: BufferId::Weights(l),
                    dst: BufferId::Accumulators,
                    cycles: calib.cycles_per_vector_mac_group,
                });
            }
        }
        for c in 0..div_ceil(h_out, lanes) {
            let active = chunk_lanes(c, h_out);
            // bias read plus activation write
            traffic += 4 * active as u64;
            ops.push(VectorOp {
                kind: VectorOpKind::Store,
                layer: l,
                row: 0,
                chunk: c,
                lanes: active,
                src: BufferId::Accumulators,
                dst: BufferId::Activation(l + 1),
                cycles: calib.cycles_per_load_store_vector,
            });
        }
        if l < 2 {
            for c in 0..div_ceil(h_out, lanes) {
                ops.push(VectorOp {
                    kind: VectorOpKind::Relu,
                    layer: l,
                    row: 0,
                    chunk: c,
                    lanes: chunk_lanes(c, h_out),
                    src: BufferId::Activation(l + 1),
                    dst: BufferId::Activation(l + 1),
                    cycles: calib.cycles_per_relu_vector,
                });
            }
        }
    }
    let compute_cycles: u64 = ops.iter().map(|o| o.cycles).sum();
    let [n_in, h1, h2, n_out] = model.dims;
    let parameter_bytes = model.parameter_bytes();
    let io_bytes = 2 * 2 * (n_in + n_out) + 2 * (h1 + h2);
    let parameter_buffer_tiles = div_ceil(parameter_bytes, array.local_mem_bytes).max(1);
    let io_buffer_tiles = div_ceil(io_bytes, array.local_mem_bytes).max(1);
    let buffer_tiles = parameter_buffer_tiles + io_buffer_tiles;
    let footprint = parameter_bytes + io_bytes;
    if buffer_tiles > MAX_BUFFER_TILES {
        return Err(Error::Placement(format!(
            "kernel needs {footprint} bytes ({parameter_bytes} parameters + {io_bytes} I/O) in {buffer_tiles} memory tiles, \
             but one kernel reaches {MAX_BUFFER_TILES} tiles × {} bytes = {} bytes",
            array.local_mem_bytes,
            MAX_BUFFER_TILES * array.local_mem_bytes
        )));
    }
    Ok(KernelSchedule {
        ops,
        lanes,
        compute_cycles,
        overhead_cycles: calib.kernel_overhead_cycles,
        total_cycles: compute_cycles + calib.kernel_overhead_cycles,
        parameter_bytes,
        io_bytes,
        buffer_footprint_bytes: footprint,
        memory_traffic_bytes: traffic,
        parameter_buffer_tiles,
        io_buffer_tiles,
        replicas: 1,
        tiles_used: TilesUsed { kernel: 1, buffer: buffer_tiles, stream: STREAM_SWITCHES_PER_KERNEL },
        clock_hz: array.clock_hz,
        local_mem_bytes: array.local_mem_bytes,
        model: Some(model.clone()),
    })
}

impl KernelSchedule {
    /// A schedule with no kernel placed.
    pub fn empty(array: &TileArrayConfig) -> Self {
        KernelSchedule {
            ops: Vec::new(),
            lanes: array.vector_lanes,
            compute_cycles: 0,
            overhead_cycles: 0,
            total_cycles: 0,
            parameter_bytes: 0,
            io_bytes: 0,
            buffer_footprint_bytes: 0,
            memory_traffic_bytes: 0,
            parameter_buffer_tiles: 0,
            io_buffer_tiles: 0,
            replicas: 0,
            tiles_used: TilesUsed::default(),
            clock_hz: array.clock_hz,
            local_mem_bytes: array.local_mem_bytes,
            model: None,
        }
    }

    /// `n` independent copies of this kernel, each with its own buffers and route.
    pub fn replicated(&self, n: usize) -> Self {
        let per_replica = |used: usize| used.checked_div(self.replicas).unwrap_or(0);
        let per = TilesUsed {
            kernel: per_replica(self.tiles_used.kernel),
            buffer: per_replica(self.tiles_used.buffer),
            stream: per_replica(self.tiles_used.stream),
        };
        KernelSchedule {
            replicas: n,
            tiles_used: TilesUsed { kernel: per.kernel * n, buffer: per.buffer * n, stream: per.stream * n },
            ..self.clone()
        }
    }

    pub fn kernel_ns(&self) -> f64 {
        super::cycles_to_ns(self.total_cycles, self.clock_hz)
    }

    pub fn count(&self, kind: VectorOpKind) -> usize {
        self.ops.iter().filter(|o| o.kind == kind).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{quantize_model, MlpModel};
    use proptest::prelude::*;

    fn qmodel(dims: &[usize]) -> QuantizedMlp {
        quantize_model(&MlpModel::init(dims, 1, 1.0).unwrap(), 12).unwrap()
    }

    // Independent op-count walker: closed-form counts from the widths alone.
    fn expected_compute_cycles(dims: [usize; 4], lanes: usize, p: &CalibrationProfile) -> u64 {
        let mut cycles = 0;
        for l in 0..3 {
            let (h_in, h_out) = (dims[l], dims[l + 1]);
            let cin = (h_in + lanes - 1) / lanes;
            let cout = (h_out + lanes - 1) / lanes;
            cycles += (cin + cout) as u64 * p.cycles_per_load_store_vector;
            cycles += (h_out * cin) as u64 * p.cycles_per_vector_mac_group;
            if l < 2 {
                cycles += cout as u64 * p.cycles_per_relu_vector;
            }
        }
        cycles
    }

    #[test]
    fn reference_network_is_102_cycles() {
        let s = map_to_schedule(&qmodel(&[2, 8, 8, 2]), &TileArrayConfig::default(), &CalibrationProfile::vck190_reference())
            .unwrap();
        assert_eq!(s.count(VectorOpKind::Mac), 18);
        assert_eq!(s.count(VectorOpKind::Relu), 2);
        assert_eq!(s.count(VectorOpKind::Load) + s.count(VectorOpKind::Store), 6);
        assert_eq!(s.compute_cycles, 44);
        assert_eq!(s.total_cycles, 102);
        assert_eq!(s.kernel_ns(), 81.6);
        assert_eq!(s.tiles_used, TilesUsed { kernel: 1, buffer: 2, stream: 2 });
        assert_eq!(s.memory_traffic_bytes, 300);
        assert!(s.buffer_footprint_bytes <= s.tiles_used.buffer * s.local_mem_bytes);
    }

    #[test]
    fn trivial_network_with_zero_costs_is_overhead_only() {
        let mut calib = CalibrationProfile::zero_cost();
        calib.kernel_overhead_cycles = 17;
        let s = map_to_schedule(&qmodel(&[1, 1, 1, 2]), &TileArrayConfig::default(), &calib).unwrap();
        assert_eq!(s.total_cycles, 17);
    }

    #[test]
    fn doubling_h1_adds_exactly_the_new_mac_groups() {
        let array = TileArrayConfig::default();
        let calib = CalibrationProfile::vck190_reference();
        let base = map_to_schedule(&qmodel(&[2, 8, 8, 2]), &array, &calib).unwrap();
        let wide = map_to_schedule(&qmodel(&[2, 16, 8, 2]), &array, &calib).unwrap();
        let added_groups = (wide.count(VectorOpKind::Mac) - base.count(VectorOpKind::Mac)) as u64;
        assert_eq!(added_groups, 8);
        assert_eq!(wide.compute_cycles - base.compute_cycles, added_groups * calib.cycles_per_vector_mac_group);
    }

    #[test]
    fn oversized_model_is_a_placement_error() {
        let big = qmodel(&[512, 256, 256, 2]);
        let err = map_to_schedule(&big, &TileArrayConfig::default(), &CalibrationProfile::vck190_reference()).unwrap_err();
        assert!(matches!(err, Error::Placement(ref m) if m.contains("bytes")), "{err}");
    }

    proptest! {
        #[test]
        fn cycle_count_matches_walker(
            n_in in 1usize..40, h1 in 1usize..40, h2 in 1usize..40, d in 2usize..5, lanes in 1usize..33,
            mac in 0u64..5, relu in 0u64..5, ls in 0u64..5, over in 0u64..100,
        ) {
            let dims = [n_in, h1, h2, d];
            let array = TileArrayConfig { vector_lanes: lanes, ..Default::default() };
            let calib = CalibrationProfile {
                cycles_per_vector_mac_group: mac,
                cycles_per_relu_vector: relu,
                cycles_per_load_store_vector: ls,
                kernel_overhead_cycles: over,
                ..CalibrationProfile::vck190_reference()
            };
            let s = map_to_schedule(&qmodel(&dims), &array, &calib).unwrap();
            prop_assert_eq!(s.compute_cycles, expected_compute_cycles(dims, lanes, &calib));
            prop_assert_eq!(s.total_cycles, s.ops.iter().map(|o| o.cycles).sum::<u64>() + over);
            prop_assert!(s.buffer_footprint_bytes <= s.tiles_used.buffer * s.local_mem_bytes);
        }

        #[test]
        fn raising_any_cost_never_lowers_total(which in 0usize..4, bump in 1u64..10) {
            let model = qmodel(&[2, 8, 8, 3]);
            let array = TileArrayConfig::default();
            let base = CalibrationProfile::vck190_reference();
            let mut more = base.clone();
            match which {
                0 => more.cycles_per_vector_mac_group += bump,
                1 => more.cycles_per_relu_vector += bump,
                2 => more.cycles_per_load_store_vector += bump,
                _ => more.kernel_overhead_cycles += bump,
            }
            let a = map_to_schedule(&model, &array, &base).unwrap().total_cycles;
            let b = map_to_schedule(&model, &array, &more).unwrap().total_cycles;
            prop_assert!(b > a);
        }
    }
}
