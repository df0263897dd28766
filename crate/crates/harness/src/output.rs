//! Trace and summary files.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use dsmooth::{Trace, TraceRow};
use serde_json::Value;

use crate::config::Result;
use crate::error::HarnessError;

pub const TRACE_COLUMNS: [&str; 14] = [
    "iter",
    "wall_ms",
    "tau",
    "beta",
    "gamma",
    "objective",
    "gap_x",
    "gap_y",
    "gap_y_cert",
    "avg_gap_x",
    "avg_gap_y",
    "duality_gap",
    "primal_gap",
    "discrepancy",
];

/// Round-trip float formatting so traces compare byte for byte.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn trace_record(r: &TraceRow, timing: bool) -> Vec<String> {
    vec![
        r.iter.to_string(),
        if timing {
            num(r.wall_ms)
        } else {
            String::new()
        },
        opt(r.tau),
        opt(r.beta),
        opt(r.gamma),
        num(r.objective),
        num(r.gap_x),
        num(r.gap_y),
        opt(r.gap_y_cert),
        opt(r.avg_gap_x),
        opt(r.avg_gap_y),
        opt(r.duality_gap),
        opt(r.primal_gap),
        opt(r.discrepancy),
    ]
}

/// Writes `trace.csv`, plus `timing.csv` with the wall-clock column unless
/// `timing` puts it inline.
pub fn write_trace(dir: &Path, trace: &Trace, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("trace.csv"))?;
    w.write_record(TRACE_COLUMNS)?;
    for r in &trace.rows {
        w.write_record(trace_record(r, timing))?;
    }
    w.flush()?;
    if !timing {
        let mut t = csv::Writer::from_path(dir.join("timing.csv"))?;
        t.write_record(["iter", "wall_ms"])?;
        for r in &trace.rows {
            t.write_record([r.iter.to_string(), num(r.wall_ms)])?;
        }
        t.flush()?;
    }
    Ok(())
}

/// Reads one numeric column of a trace, skipping rows where it is empty.
pub fn read_trace_column(path: &Path, column: &str) -> Result<Vec<(u64, f64)>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            HarnessError::Config(format!("{} has no column {name:?}", path.display()))
        })
    };
    let (it, col) = (find("iter")?, find(column)?);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(col).unwrap_or("");
        if field.is_empty() {
            continue;
        }
        let parse_err = |what: &str| {
            HarnessError::Config(format!(
                "{}: bad {what} on data row {}",
                path.display(),
                line + 1
            ))
        };
        let t: u64 = rec
            .get(it)
            .unwrap_or("")
            .parse()
            .map_err(|_| parse_err("iter"))?;
        let v: f64 = field.parse().map_err(|_| parse_err(column))?;
        out.push((t, v));
    }
    Ok(out)
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))
}
