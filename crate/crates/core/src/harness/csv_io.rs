//! Fixed-column CSV for episode logs and window metrics.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which parses
//! back to the identical `f64`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::cascade::StepLog;
use crate::error::{io_err, Error, Result};
use crate::harness::metrics::WindowMetrics;

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_steps<W: Write>(log: &[StepLog], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(StepLog::COLUMNS)?;
    for row in log {
        w.write_record(row.values().iter().map(|v| format_float(*v)))?;
    }
    w.flush().map_err(io_err("<csv writer>"))?;
    Ok(())
}

pub fn emit_csv(log: &[StepLog], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_steps(log, std::io::BufWriter::new(file))
}

pub fn read_steps<R: Read>(input: R) -> Result<Vec<StepLog>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(StepLog::COLUMNS.iter().copied()) {
        return Err(Error::InvalidArgument("steps.csv header does not match the expected columns".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut values = [0.0; 34];
        for (slot, field) in values.iter_mut().zip(rec.iter()) {
            *slot = field.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("row {}: cannot parse {field:?} as a number", i + 2))
            })?;
        }
        if rec.len() != values.len() {
            return Err(Error::InvalidArgument(format!("row {}: expected 34 fields, got {}", i + 2, rec.len())));
        }
        rows.push(StepLog::from_values(&values));
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<StepLog>> {
    read_steps(File::open(path).map_err(io_err(path))?)
}

/// One row per window, labelled by `label` (e.g. a variant name).
pub fn write_metrics<W: Write>(rows: &[(String, Vec<WindowMetrics>)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string(), "window_start".into(), "window_end".into(), "samples".into()];
    header.extend(WindowMetrics::NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (label, metrics) in rows {
        for m in metrics {
            let mut rec = vec![
                label.clone(),
                format_float(m.window.start),
                format_float(m.window.end),
                m.samples.to_string(),
            ];
            rec.extend(m.values().iter().map(|v| format_float(*v)));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(io_err("<csv writer>"))?;
    Ok(())
}
