use super::schedule::{KernelSchedule, VectorOpKind};
use crate::discriminators::argmax;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nn::{round_shift_half_up, saturate_i16, QuantizedMlp};
use crate::signal::StateLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelRun {
    pub labels: Vec<StateLabel>,
    pub logits: Vec<Vec<i16>>,
    /// Kernel latency of every shot, ns.
    pub kernel_ns: Vec<f64>,
    /// Cycles charged by the interpreter for every shot.
    pub cycles: Vec<u64>,
}

impl KernelRun {
    /// The common per-shot latency, if every shot took the same time.
    pub fn constant_kernel_ns(&self) -> Option<f64> {
        let first = *self.kernel_ns.first()?;
        self.kernel_ns.iter().all(|&v| v == first).then_some(first)
    }
}

/// Working state of one kernel invocation.
struct Machine<'a> {
    model: &'a QuantizedMlp,
    lanes: usize,
    activations: [Vec<i16>; 4],
    registers: Vec<Vec<i16>>,
    /// Per output row, per lane partial sums.
    accumulators: Vec<Vec<i64>>,
    cycles: u64,
}

impl<'a> Machine<'a> {
    fn new(model: &'a QuantizedMlp, lanes: usize, input: &[i16]) -> Self {
        let d = model.dims;
        Machine {
            model,
            lanes,
            activations: [input.to_vec(), vec![0; d[1]], vec![0; d[2]], vec![0; d[3]]],
            registers: Vec::new(),
            accumulators: Vec::new(),
            cycles: 0,
        }
    }

    fn run(&mut self, schedule: &KernelSchedule) {
        let lanes = self.lanes;
        for op in &schedule.ops {
            let layer = &self.model.layers[op.layer];
            match op.kind {
                VectorOpKind::Load => {
                    if op.chunk == 0 {
                        self.registers.clear();
                        self.accumulators = vec![vec![0; lanes]; layer.outputs];
                    }
                    let start = op.chunk * lanes;
                    let mut reg = vec![0i16; lanes];
                    reg[..op.lanes].copy_from_slice(&self.activations[op.layer][start..start + op.lanes]);
                    self.registers.push(reg);
                }
                VectorOpKind::Mac => {
                    let start = op.row * layer.inputs + op.chunk * lanes;
                    let weights = &layer.weights[start..start + op.lanes];
                    let reg = &self.registers[op.chunk];
                    let acc = &mut self.accumulators[op.row];
                    for j in 0..op.lanes {
                        acc[j] += weights[j] as i64 * reg[j] as i64;
                    }
                }
                VectorOpKind::Store => {
                    let frac = self.model.fractional_bits;
                    for r in op.chunk * lanes..op.chunk * lanes + op.lanes {
                        let total: i64 = self.accumulators[r].iter().sum::<i64>() + ((layer.biases[r] as i64) << frac);
                        self.activations[op.layer + 1][r] = saturate_i16(round_shift_half_up(total, layer.shift)).0;
                    }
                }
                VectorOpKind::Relu => {
                    let out = &mut self.activations[op.layer + 1];
                    for v in &mut out[op.chunk * lanes..op.chunk * lanes + op.lanes] {
                        *v = (*v).max(0);
                    }
                }
            }
            self.cycles += op.cycles;
        }
        self.cycles += schedule.overhead_cycles;
    }
}

/// Execute the schedule on every quantized input shot.
///
/// Arithmetic is lane-chunked but bit-identical to
/// [`forward_fixed_scalar`](crate::nn::forward_fixed_scalar): lane partial sums are
/// reduced before the same bias alignment, round-half-up shift and saturation.
pub fn simulate_kernel(schedule: &KernelSchedule, inputs: &[Vec<i16>], exec: Execution) -> Result<KernelRun> {
    let model = schedule
        .model
        .as_ref()
        .ok_or_else(|| Error::Input("schedule has no kernel to execute".into()))?;
    let n_in = model.dims[0];
    if let Some(bad) = inputs.iter().find(|x| x.len() != n_in) {
        return Err(Error::Input(format!("kernel expects {n_in} inputs per shot, got {}", bad.len())));
    }
    let results = exec.map(inputs, |x| {
        let mut m = Machine::new(model, schedule.lanes, x);
        m.run(schedule);
        let logits = std::mem::take(&mut m.activations[3]);
        (logits, m.cycles)
    });
    let mut run = KernelRun {
        labels: Vec::with_capacity(inputs.len()),
        logits: Vec::with_capacity(inputs.len()),
        kernel_ns: Vec::with_capacity(inputs.len()),
        cycles: Vec::with_capacity(inputs.len()),
    };
    for (logits, cycles) in results {
        run.labels.push(StateLabel(argmax(&logits)));
        run.logits.push(logits);
        run.kernel_ns.push(super::cycles_to_ns(cycles, schedule.clock_hz));
        run.cycles.push(cycles);
    }
    Ok(run)
}
