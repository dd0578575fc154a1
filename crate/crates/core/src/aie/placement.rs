//! Tile placement and utilisation.
//!
//! Coordinates use a `(rows + 1) × cols` grid: row 0 is the interface row (stream
//! switches only), rows `1..=rows` are compute tiles. Each compute tile has three
//! resources that are counted separately: the core (kernel role), the memory module
//! (buffer role) and the stream switch (stream role).
//!
//! Denominators: kernel and buffer percentages use `rows × cols` tiles; the stream
//! percentage uses the `(rows + 1) × cols` switches of the whole grid.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::config::TileArrayConfig;
use super::schedule::KernelSchedule;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileRole {
    Kernel,
    Buffer,
    Stream,
}

impl TileRole {
    pub fn as_str(self) -> &'static str {
        match self {
            TileRole::Kernel => "kernel",
            TileRole::Buffer => "buffer",
            TileRole::Stream => "stream",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlacementEntry {
    pub row: usize,
    pub col: usize,
    pub role: TileRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationReport {
    pub kernel_tile_pct: f64,
    pub buffer_tile_pct: f64,
    pub stream_tile_pct: f64,
    pub kernel_tiles: usize,
    pub buffer_tiles: usize,
    pub stream_tiles: usize,
    pub total_tiles: usize,
    pub total_stream_switches: usize,
    pub placement: Vec<PlacementEntry>,
}

impl UtilizationReport {
    /// `row,col,role` CSV.
    pub fn placement_csv(&self) -> String {
        let mut out = String::from("row,col,role\n");
        for p in &self.placement {
            out.push_str(&format!("{},{},{}\n", p.row, p.col, p.role.as_str()));
        }
        out
    }
}

/// Column offsets (relative to the kernel) of a kernel's memory modules: own, east, west.
/// The fourth reachable module is north of the kernel.
const BUFFER_OFFSETS: [(usize, isize); 4] = [(1, 0), (1, 1), (1, -1), (2, 0)];

fn pct(used: usize, total: usize) -> f64 {
    100.0 * used as f64 / total as f64
}

/// Place every kernel replica on the array row adjacent to the interface row,
/// centred and side by side, and report per-class utilisation.
pub fn compute_utilization(schedule: &KernelSchedule, array: &TileArrayConfig) -> Result<UtilizationReport> {
    array.validate()?;
    let mut placement = Vec::new();
    let replicas = schedule.replicas;
    if let Some(per_kernel_buffers) = schedule.tiles_used.buffer.checked_div(replicas) {
        if per_kernel_buffers > BUFFER_OFFSETS.len() {
            return Err(Error::Placement(format!("{per_kernel_buffers} buffers exceed the reachable memory modules")));
        }
        let offsets = &BUFFER_OFFSETS[..per_kernel_buffers];
        let west = offsets.iter().any(|o| o.1 < 0) as usize;
        let east = offsets.iter().any(|o| o.1 > 0) as usize;
        let width = 1 + west + east;
        let span = width * replicas;
        let north = offsets.iter().any(|o| o.0 == 2);
        if span > array.cols || (north && array.rows < 2) {
            return Err(Error::Placement(format!(
                "{replicas} kernel(s) need {span} columns{} but the array has {} × {}",
                if north { " and 2 rows" } else { "" },
                array.rows,
                array.cols
            )));
        }
        let start = (array.cols - span) / 2;
        for k in 0..replicas {
            let col = start + k * width + west;
            placement.push(PlacementEntry { row: 1, col, role: TileRole::Kernel });
            for &(row, dc) in offsets {
                placement.push(PlacementEntry { row, col: (col as isize + dc) as usize, role: TileRole::Buffer });
            }
            placement.push(PlacementEntry { row: 0, col, role: TileRole::Stream });
            placement.push(PlacementEntry { row: 1, col, role: TileRole::Stream });
        }
    }
    let mut seen = HashSet::new();
    for p in &placement {
        let max_row = if p.role == TileRole::Stream { array.rows } else { array.rows.max(1) };
        if p.col >= array.cols || p.row > max_row || (p.role != TileRole::Stream && p.row == 0) {
            return Err(Error::Placement(format!("{:?} outside the array", p)));
        }
        if !seen.insert(*p) {
            return Err(Error::Placement(format!("role conflict at tile ({}, {})", p.row, p.col)));
        }
    }
    placement.sort();
    let count = |role| placement.iter().filter(|p| p.role == role).count();
    let (kernel_tiles, buffer_tiles, stream_tiles) = (count(TileRole::Kernel), count(TileRole::Buffer), count(TileRole::Stream));
    Ok(UtilizationReport {
        kernel_tile_pct: pct(kernel_tiles, array.total_tiles()),
        buffer_tile_pct: pct(buffer_tiles, array.total_tiles()),
        stream_tile_pct: pct(stream_tiles, array.stream_switches()),
        kernel_tiles,
        buffer_tiles,
        stream_tiles,
        total_tiles: array.total_tiles(),
        total_stream_switches: array.stream_switches(),
        placement,
    })
}

/// True when the occupied tiles form one 4-connected region.
pub fn is_contiguous(placement: &[PlacementEntry]) -> bool {
    let cells: BTreeSet<(usize, usize)> = placement.iter().map(|p| (p.row, p.col)).collect();
    let Some(&first) = cells.iter().next() else {
        return true;
    };
    let mut seen = BTreeSet::from([first]);
    let mut queue = VecDeque::from([first]);
    while let Some((r, c)) = queue.pop_front() {
        let neighbours = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
        for n in neighbours {
            if cells.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == cells.len()
}
