//! Trace and event CSV files.
//!
//! Trace columns: `t_s`, one `p_<node>_mbar` per node, one
//! `v_<element>_<lobe>_uL` and one `state_<element>_<lobe>` per lobe, then
//! the cumulative `inj_uL` and `vent_uL`.

use std::io::{Read, Write};

use thiserror::Error;

use super::sim::{SnapEvent, Trace};
use crate::elements::Branch;

pub const PA_PER_MBAR: f64 = 100.0;
pub const M3_PER_UL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema mismatch at column `{column}`: {reason}")]
    Schema { column: String, reason: String },
    #[error("row {row}: bad value `{value}` in column `{column}`")]
    Value { row: usize, column: String, value: String },
}

pub fn trace_header(trace: &Trace) -> Vec<String> {
    let mut h = vec!["t_s".to_string()];
    h.extend(trace.node_names.iter().map(|n| format!("p_{n}_mbar")));
    h.extend(trace.lobes.iter().map(|l| format!("v_{}_{}_uL", l.element, l.lobe.label())));
    h.extend(trace.lobes.iter().map(|l| format!("state_{}_{}", l.element, l.lobe.label())));
    h.push("inj_uL".into());
    h.push("vent_uL".into());
    h
}

pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(trace))?;
    let mut row: Vec<String> = Vec::new();
    for k in 0..trace.times.len() {
        row.clear();
        row.push(format!("{:.9}", trace.times[k]));
        row.extend(trace.pressures.iter().map(|p| format!("{:.6}", p[k] / PA_PER_MBAR)));
        row.extend(trace.volumes.iter().map(|v| format!("{:.6}", v[k] / M3_PER_UL)));
        row.extend(trace.branches.iter().map(|b| b[k].label().to_string()));
        row.push(format!("{:.6}", trace.injected[k] / M3_PER_UL));
        row.push(format!("{:.6}", trace.vented[k] / M3_PER_UL));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_events_csv<W: Write>(events: &[SnapEvent], out: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "element", "lobe", "kind", "p_mbar"])?;
    for e in events {
        w.write_record([
            format!("{:.9}", e.t),
            e.element.clone(),
            e.lobe.label().to_string(),
            e.kind.label().to_string(),
            format!("{:.6}", e.pressure / PA_PER_MBAR),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// A trace read back from CSV, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub times: Vec<f64>,
    pub pressures: Vec<(String, Vec<f64>)>,
    /// (element, lobe label, volume series)
    pub volumes: Vec<(String, String, Vec<f64>)>,
    pub states: Vec<(String, String, Vec<Branch>)>,
    pub injected: Vec<f64>,
    pub vented: Vec<f64>,
}

/// A bare pressure log: `t_s, p_mbar`.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureLog {
    pub times: Vec<f64>,
    pub pressures: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceFile {
    Trace(TraceTable),
    PressureLog(PressureLog),
}

fn split_lobe(mid: &str, column: &str) -> Result<(String, String), CsvError> {
    match mid.rsplit_once('_') {
        Some((el, lobe)) if (lobe == "weak" || lobe == "strong") && !el.is_empty() => {
            Ok((el.to_string(), lobe.to_string()))
        }
        _ => Err(CsvError::Schema { column: column.into(), reason: "expected <element>_<weak|strong>".into() }),
    }
}

enum Col {
    Time,
    Pressure,
    Volume,
    State,
    Inj,
    Vent,
}

/// Parse a trace CSV or a two-column pressure log.
pub fn read_trace_csv<R: Read>(input: R) -> Result<TraceFile, CsvError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let bad = |c: &str, why: &str| CsvError::Schema { column: c.into(), reason: why.into() };
    if header.first().map(String::as_str) != Some("t_s") {
        return Err(bad(header.first().map_or("", String::as_str), "first column must be t_s"));
    }
    let sensor = header.len() == 2 && header[1] == "p_mbar";

    let mut cols = Vec::with_capacity(header.len());
    let mut table = TraceTable {
        times: Vec::new(),
        pressures: Vec::new(),
        volumes: Vec::new(),
        states: Vec::new(),
        injected: Vec::new(),
        vented: Vec::new(),
    };
    if !sensor {
        // Stage order: pressures, volumes, states, then inj and vent.
        let mut stage = 0;
        for c in &header {
            let (kind, st) = if c == "t_s" && cols.is_empty() {
                (Col::Time, 0)
            } else if let Some(n) = c.strip_prefix("p_").and_then(|s| s.strip_suffix("_mbar")) {
                table.pressures.push((n.to_string(), Vec::new()));
                (Col::Pressure, 1)
            } else if let Some(m) = c.strip_prefix("v_").and_then(|s| s.strip_suffix("_uL")) {
                let (el, lobe) = split_lobe(m, c)?;
                table.volumes.push((el, lobe, Vec::new()));
                (Col::Volume, 2)
            } else if let Some(m) = c.strip_prefix("state_") {
                let (el, lobe) = split_lobe(m, c)?;
                table.states.push((el, lobe, Vec::new()));
                (Col::State, 3)
            } else if c == "inj_uL" {
                (Col::Inj, 4)
            } else if c == "vent_uL" {
                (Col::Vent, 5)
            } else {
                return Err(bad(c, "unrecognised column"));
            };
            if st < stage || (st >= 4 && st == stage) {
                return Err(bad(c, "column out of order"));
            }
            stage = st;
            cols.push(kind);
        }
        if table.pressures.is_empty() {
            return Err(bad("p_<node>_mbar", "no pressure column"));
        }
        if stage != 5 {
            return Err(bad("inj_uL", "missing cumulative volume columns"));
        }
        let vol_ids: Vec<_> = table.volumes.iter().map(|(e, l, _)| (e.clone(), l.clone())).collect();
        let st_ids: Vec<_> = table.states.iter().map(|(e, l, _)| (e.clone(), l.clone())).collect();
        if vol_ids != st_ids {
            return Err(bad("state_*", "state columns do not match volume columns"));
        }
    }

    let mut log = PressureLog { times: Vec::new(), pressures: Vec::new() };
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(CsvError::Value { row: row + 1, column: header[0].clone(), value: "wrong field count".into() });
        }
        let num = |i: usize| -> Result<f64, CsvError> {
            rec[i].parse::<f64>().map_err(|_| CsvError::Value {
                row: row + 1,
                column: header[i].clone(),
                value: rec[i].to_string(),
            })
        };
        if sensor {
            log.times.push(num(0)?);
            log.pressures.push(num(1)? * PA_PER_MBAR);
            continue;
        }
        let (mut ip, mut iv, mut is) = (0, 0, 0);
        for (i, kind) in cols.iter().enumerate() {
            match kind {
                Col::Time => table.times.push(num(i)?),
                Col::Pressure => {
                    table.pressures[ip].1.push(num(i)? * PA_PER_MBAR);
                    ip += 1;
                }
                Col::Volume => {
                    table.volumes[iv].2.push(num(i)? * M3_PER_UL);
                    iv += 1;
                }
                Col::State => {
                    let b = match &rec[i] {
                        "pre" => Branch::PreSnap,
                        "post" => Branch::PostSnap,
                        other => {
                            return Err(CsvError::Value { row: row + 1, column: header[i].clone(), value: other.into() })
                        }
                    };
                    table.states[is].2.push(b);
                    is += 1;
                }
                Col::Inj => table.injected.push(num(i)? * M3_PER_UL),
                Col::Vent => table.vented.push(num(i)? * M3_PER_UL),
            }
        }
    }
    Ok(if sensor { TraceFile::PressureLog(log) } else { TraceFile::Trace(table) })
}
