use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{MetricsTrace, StabilityVerdict};

/// One CSV row of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: u64,
    #[serde(rename = "sumX")]
    pub sum_x: u64,
    #[serde(rename = "sumY")]
    pub sum_y: u64,
    #[serde(rename = "sumU")]
    pub sum_u: u64,
    pub power: u64,
    pub lyapunov: u128,
}

const HEADER: [&str; 6] = ["slot", "sumX", "sumY", "sumU", "power", "lyapunov"];

pub fn write_trace_csv<W: Write>(trace: &MetricsTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for n in 0..trace.len() {
        w.serialize(TraceRow {
            slot: n as u64,
            sum_x: trace.sum_own[n],
            sum_y: trace.sum_relay[n],
            sum_u: trace.sum_power_queue[n],
            power: trace.power[n],
            lyapunov: trace.lyapunov[n],
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        return Err(Error::MalformedTrace(format!(
            "header {header:?}, expected {HEADER:?}"
        )));
    }
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<TraceRow>, _>>()?;
    for (n, row) in rows.iter().enumerate() {
        if row.slot != n as u64 {
            return Err(Error::MalformedTrace(format!(
                "row {n} has slot {}",
                row.slot
            )));
        }
    }
    Ok(rows)
}

/// Human-readable verdict record: one `key = value` line per field.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictReport {
    pub label: String,
    pub seeds: Vec<u64>,
    pub verdicts: Vec<StabilityVerdict>,
}

impl std::fmt::Display for VerdictReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "[{}]", self.label)?;
        writeln!(f, "seeds = {:?}", self.seeds)?;
        if let Some(v) = self.verdicts.first() {
            writeln!(f, "s_lo = {}", v.s_lo)?;
            writeln!(f, "s_hi = {}", v.s_hi)?;
            writeln!(f, "backlog_bound = {}", v.backlog_bound)?;
        }
        for (seed, v) in self.seeds.iter().zip(&self.verdicts) {
            writeln!(
                f,
                "seed {seed}: verdict = {}, slope = {:.6}, ci95 = [{:.6}, {:.6}], final_backlog = {}",
                v.verdict, v.slope, v.ci.0, v.ci.1, v.final_backlog
            )?;
        }
        Ok(())
    }
}
