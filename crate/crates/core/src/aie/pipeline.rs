//! Discrete-event model of the MM2S → kernel → S2MM streaming pipeline.
//!
//! The `main` control loop issues shots into the MM2S input FIFO. Each stage serves
//! one shot at a time for a fixed number of cycles and holds a finished shot until
//! the next FIFO has room (blocking after service), which is how back-pressure
//! propagates upstream. S2MM drains into memory without bound.
//!
//! Without overlap the control loop runs `main_overhead_cycles` before every shot
//! and waits for the previous shot to leave S2MM. With overlap it pays the overhead
//! once and then keeps the MM2S FIFO topped up while earlier shots are in flight.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::config::StreamPipelineConfig;
use super::schedule::KernelSchedule;
use crate::error::{Error, Result};

pub const STAGE_NAMES: [&str; 3] = ["mm2s", "kernel", "s2mm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub init_ns: f64,
    pub main_ns_per_iteration: f64,
    pub kernel_ns: f64,
    /// Makespan after initialisation divided by the shot count.
    pub end_to_end_ns_per_shot: f64,
    /// Issue-to-exit latency of the first shot (pipeline fill).
    pub first_shot_latency_ns: f64,
    pub steady_state_throughput_shots_per_s: f64,
    pub makespan_ns: f64,
    pub shots: u64,
    pub overlap_enabled: bool,
}

/// Cycle timestamps of one shot, measured from the end of initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShotSpan {
    pub shot: usize,
    /// Start of the control work that issued this shot.
    pub control_start: u64,
    pub issued: u64,
    pub stage_start: [u64; 3],
    pub stage_end: [u64; 3],
    /// When the shot left S2MM into memory.
    pub exited: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub report: LatencyReport,
    pub stage_cycles: [u64; 3],
    pub fifo_depths: [usize; 3],
    pub max_fifo_occupancy: [usize; 3],
    pub exit_order: Vec<usize>,
    pub spans: Vec<ShotSpan>,
    pub makespan_cycles: u64,
    pub events: u64,
}

impl PipelineRun {
    pub fn shots_in(&self) -> usize {
        self.spans.len()
    }

    pub fn shots_out(&self) -> usize {
        self.exit_order.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    StageDone(usize),
    ControlReady,
}

struct Stage {
    latency: u64,
    busy: Option<(usize, u64)>,
    holding: Option<usize>,
}

/// Run the pipeline with the kernel stage taking `schedule.total_cycles` per shot.
pub fn simulate_pipeline(pipeline: &StreamPipelineConfig, schedule: &KernelSchedule, shots: usize) -> Result<PipelineRun> {
    simulate_stages(pipeline, schedule.total_cycles, schedule.clock_hz, shots)
}

/// Run the pipeline with an explicit kernel-stage latency.
pub fn simulate_stages(
    pipeline: &StreamPipelineConfig,
    kernel_cycles: u64,
    clock_hz: f64,
    shots: usize,
) -> Result<PipelineRun> {
    pipeline.validate()?;
    if shots == 0 {
        return Err(Error::Input("pipeline simulation needs at least one shot".into()));
    }
    if kernel_cycles == 0 {
        return Err(Error::Config("kernel stage latency must be >= 1 cycle".into()));
    }
    if clock_hz.is_nan() || clock_hz <= 0.0 {
        return Err(Error::Config("clock_hz must be > 0".into()));
    }
    let latencies = [pipeline.mm2s.latency_cycles, kernel_cycles, pipeline.s2mm.latency_cycles];
    let depths = [pipeline.mm2s.fifo_depth, pipeline.kernel_fifo_depth, pipeline.s2mm.fifo_depth];
    let overhead = pipeline.main_overhead_cycles;

    let mut stages: Vec<Stage> = latencies.iter().map(|&latency| Stage { latency, busy: None, holding: None }).collect();
    let mut fifos: [VecDeque<usize>; 3] = Default::default();
    let mut max_occ = [0usize; 3];
    let mut spans: Vec<ShotSpan> = Vec::with_capacity(shots);
    let mut exit_order = Vec::with_capacity(shots);
    let mut queue: BinaryHeap<Reverse<(u64, Event)>> = BinaryHeap::new();
    let mut events = 0u64;

    // control state: the next shot may be issued once `control_ready` is true
    let mut control_ready = false;
    let mut control_start = 0u64;
    queue.push(Reverse((overhead, Event::ControlReady)));

    let mut now = 0;
    while let Some(Reverse((t, ev))) = queue.pop() {
        now = t;
        events += 1;
        match ev {
            Event::StageDone(k) => {
                let (shot, _) = stages[k].busy.take().expect("completion for an idle stage");
                spans[shot].stage_end[k] = t;
                stages[k].holding = Some(shot);
            }
            Event::ControlReady => control_ready = true,
        }
        // settle everything that can move at this instant
        loop {
            let mut moved = false;
            for k in (0..3).rev() {
                if let Some(shot) = stages[k].holding {
                    if k == 2 {
                        spans[shot].exited = t;
                        exit_order.push(shot);
                        stages[k].holding = None;
                        moved = true;
                        if !pipeline.overlap_enabled && spans.len() < shots {
                            control_start = t;
                            queue.push(Reverse((t + overhead, Event::ControlReady)));
                        }
                    } else if fifos[k + 1].len() < depths[k + 1] {
                        fifos[k + 1].push_back(shot);
                        max_occ[k + 1] = max_occ[k + 1].max(fifos[k + 1].len());
                        stages[k].holding = None;
                        moved = true;
                    }
                }
                if stages[k].busy.is_none() && stages[k].holding.is_none() {
                    if let Some(shot) = fifos[k].pop_front() {
                        spans[shot].stage_start[k] = t;
                        stages[k].busy = Some((shot, t + stages[k].latency));
                        queue.push(Reverse((t + stages[k].latency, Event::StageDone(k))));
                        moved = true;
                    }
                }
            }
            if control_ready && spans.len() < shots && fifos[0].len() < depths[0] {
                let shot = spans.len();
                spans.push(ShotSpan { shot, control_start, issued: t, ..Default::default() });
                fifos[0].push_back(shot);
                max_occ[0] = max_occ[0].max(fifos[0].len());
                moved = true;
                if !pipeline.overlap_enabled {
                    control_ready = false;
                } else {
                    control_start = t;
                }
            }
            if !moved {
                break;
            }
        }
    }
    debug_assert_eq!(exit_order.len(), shots);

    let ns = |c: u64| super::cycles_to_ns(c, clock_hz);
    let makespan = now;
    let first_exit = spans[exit_order[0]].exited;
    let last_exit = spans[*exit_order.last().unwrap()].exited;
    let throughput = if shots >= 2 && last_exit > first_exit {
        (shots - 1) as f64 * clock_hz / (last_exit - first_exit) as f64
    } else {
        clock_hz / makespan as f64
    };
    let first = &spans[0];
    let report = LatencyReport {
        init_ns: ns(pipeline.init_cycles),
        main_ns_per_iteration: ns(overhead),
        kernel_ns: ns(kernel_cycles),
        end_to_end_ns_per_shot: ns(makespan) / shots as f64,
        first_shot_latency_ns: ns(first.exited - first.control_start),
        steady_state_throughput_shots_per_s: throughput,
        makespan_ns: ns(makespan),
        shots: shots as u64,
        overlap_enabled: pipeline.overlap_enabled,
    };
    Ok(PipelineRun {
        report,
        stage_cycles: latencies,
        fifo_depths: depths,
        max_fifo_occupancy: max_occ,
        exit_order,
        spans,
        makespan_cycles: makespan,
        events,
    })
}
