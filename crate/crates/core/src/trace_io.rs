//! Trace and metrics emission.
//!
//! Traces are delimited text: one row per (step, robot), a header naming
//! every field, floats with 9 significant digits, deterministic column
//! order. Metrics are a JSON key-value document.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::{MetricsSummary, SimTrace};

/// Serializes a float with 9 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.8e}")
}

fn header(trace: &SimTrace) -> Vec<String> {
    let n = trace.state_dim;
    let m = trace.input_dim;
    let mut cols = vec!["step".to_string(), "robot".to_string(), "t_s".to_string()];
    let vec_cols = |prefix: &str, len: usize| {
        (0..len)
            .map(|k| format!("{prefix}_{k}"))
            .collect::<Vec<_>>()
    };
    cols.extend(vec_cols("x", n));
    cols.extend(vec_cols("xm", n));
    cols.extend(vec_cols("e", n));
    cols.extend(vec_cols("xhat", n));
    cols.extend(vec_cols("u", m));
    cols.extend(vec_cols("uo", m));
    cols.extend(vec_cols("fr", m));
    cols.extend([
        "alpha".to_string(),
        "eps_norm".to_string(),
        "xi_max_abs".to_string(),
        "suspended".to_string(),
        "ca_degenerate".to_string(),
        "v_lyap".to_string(),
        "min_surface_distance".to_string(),
    ]);
    if trace.rows.first().is_some_and(|r| r.theta.is_some()) {
        let d = trace.rows[0].theta.as_ref().unwrap().len();
        cols.extend(vec_cols("theta", d));
    }
    cols
}

/// Writes the trace as CSV.
pub fn emit_trace(trace: &SimTrace, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(header(trace)).map_err(csv_err)?;
    for row in &trace.rows {
        let mut record: Vec<String> = vec![
            row.step.to_string(),
            row.robot.to_string(),
            format_float(row.step as f64 * trace.dt),
        ];
        for group in [
            &row.x,
            &row.x_m,
            &row.error,
            &row.x_hat,
            &row.u,
            &row.u_track,
            &row.f_r,
        ] {
            record.extend(group.iter().map(|v| format_float(*v)));
        }
        record.push(format_float(row.alpha));
        record.push(format_float(row.eps_norm));
        record.push(format_float(row.xi_max_abs));
        record.push(if row.suspended { "1" } else { "0" }.to_string());
        record.push(if row.ca_degenerate { "1" } else { "0" }.to_string());
        record.push(row.v.map_or_else(|| "nan".to_string(), format_float));
        record.push(format_float(trace.min_surface_distance[row.step]));
        if let Some(theta) = &row.theta {
            record.extend(theta.iter().map(|v| format_float(*v)));
        }
        writer.write_record(record).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the metrics summary as pretty JSON.
pub fn emit_metrics(metrics: &MetricsSummary, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let text = serde_json::to_string_pretty(metrics)
        .map_err(|e| Error::Numeric(format!("metrics serialization failed: {e}")))?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Minimal parsed view of an emitted trace, for round-trip checks and
/// external tooling.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub columns: Vec<String>,
    pub records: Vec<Vec<f64>>,
}

impl ParsedTrace {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Reads back a CSV trace written by [`emit_trace`].
pub fn parse_trace(path: &Path) -> Result<ParsedTrace> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let columns = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Numeric(format!("bad trace field `{field}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        records.push(row);
    }
    Ok(ParsedTrace { columns, records })
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numeric(format!("csv failure: {other:?}")),
    }
}
