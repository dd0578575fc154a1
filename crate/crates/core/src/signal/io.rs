//! Dataset persistence.
//!
//! Integrated datasets are CSV with the header `i,q,label`. Trace datasets use a
//! little-endian binary container:
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"QSDTRACE"
//! 8       4     version (u32, = 1)
//! 12      4     reserved (0)
//! 16      8     seed (u64)
//! 24      4     dimension d (u32)
//! 28      4     samples per trace N (u32)
//! 32      8     shot count (u64)
//! 40      8     sample period, ns (f64)
//! 48      ..    per shot: label (u32), then N × (i f64, q f64)
//! ```

use std::io::{BufRead, Read, Write};

use super::{Dataset, Features, IqPoint, ReadoutTrace, Shot, StateLabel};
use crate::error::{Error, Result};

pub const TRACE_MAGIC: &[u8; 8] = b"QSDTRACE";
pub const TRACE_VERSION: u32 = 1;

pub fn write_csv<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    writeln!(out, "i,q,label")?;
    for (p, l) in data.points()? {
        writeln!(out, "{},{},{}", p.i, p.q, l.0)?;
    }
    Ok(())
}

/// Reads an `i,q,label` CSV. The dimension is `max(label) + 1` unless given.
pub fn read_csv<R: BufRead>(input: R, dimension: Option<usize>, seed: u64) -> Result<Dataset> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "i,q,label" {
        return Err(Error::Format(format!("expected header `i,q,label`, found `{header}`")));
    }
    let mut points = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("line {}: malformed record `{line}`", n + 2));
        let mut fields = line.split(',');
        let i: f64 = fields.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let q: f64 = fields.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let label: usize = fields.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        if fields.next().is_some() || !i.is_finite() || !q.is_finite() {
            return Err(bad());
        }
        points.push((IqPoint::new(i, q), label));
    }
    let d = dimension.unwrap_or_else(|| points.iter().map(|p| p.1 + 1).max().unwrap_or(0).max(2));
    Dataset::from_points(d, seed, points)
}

pub fn write_trace_binary<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let traces: Vec<(&ReadoutTrace, StateLabel)> = data
        .shots()
        .iter()
        .map(|s| match &s.features {
            Features::Trace(t) => Ok((t, s.label)),
            Features::Point(_) => Err(Error::Input("binary trace container needs trace-mode shots".into())),
        })
        .collect::<Result<_>>()?;
    let n = traces[0].0.len();
    let period = traces[0].0.sample_period_ns();
    if traces.iter().any(|(t, _)| t.len() != n || t.sample_period_ns() != period) {
        return Err(Error::Input("all traces must share length and sample period".into()));
    }
    out.write_all(TRACE_MAGIC)?;
    out.write_all(&TRACE_VERSION.to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    out.write_all(&data.seed().to_le_bytes())?;
    out.write_all(&(data.dimension() as u32).to_le_bytes())?;
    out.write_all(&(n as u32).to_le_bytes())?;
    out.write_all(&(traces.len() as u64).to_le_bytes())?;
    out.write_all(&period.to_le_bytes())?;
    for (t, label) in traces {
        out.write_all(&(label.0 as u32).to_le_bytes())?;
        for s in t.samples() {
            out.write_all(&s.i.to_le_bytes())?;
            out.write_all(&s.q.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated trace container: {e}")))?;
    Ok(buf)
}

pub fn read_trace_binary<R: Read>(mut input: R) -> Result<Dataset> {
    let magic: [u8; 8] = read_array(&mut input)?;
    if &magic != TRACE_MAGIC {
        return Err(Error::Format("bad trace container magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != TRACE_VERSION {
        return Err(Error::Format(format!("unsupported trace container version {version}")));
    }
    let _reserved: [u8; 4] = read_array(&mut input)?;
    let seed = u64::from_le_bytes(read_array(&mut input)?);
    let d = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let n = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let count = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let period = f64::from_le_bytes(read_array(&mut input)?);
    let mut shots = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let label = u32::from_le_bytes(read_array(&mut input)?) as usize;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let i = f64::from_le_bytes(read_array(&mut input)?);
            let q = f64::from_le_bytes(read_array(&mut input)?);
            samples.push(IqPoint::new(i, q));
        }
        shots.push(Shot { features: Features::Trace(ReadoutTrace::new(samples, period)?), label: StateLabel(label) });
    }
    Dataset::new(d, seed, shots)
}
