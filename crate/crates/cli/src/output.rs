//! Deterministic JSON and CSV writers.
//!
//! Every float is rounded to 12 significant digits before printing, so reports
//! are byte-identical across runs and platforms.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use lambdaq::isolation::IsolationReport;
use lambdaq::portfolio::OptimReport;
use lambdaq::SolveReport;
use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::CliError;

pub const SIG_DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

pub fn fmt_sig(x: f64) -> String {
    if x.is_finite() {
        format!("{}", round_sig(x))
    } else {
        x.to_string()
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| Number::from_f64(round_sig(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut v = serde_json::to_value(value).map_err(|e| CliError::Input(e.to_string()))?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    write_text(path, &String::from_utf8_lossy(&bytes))
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Solver trace: `iter,x,f,step_kind,bracket_left,bracket_right`.
pub fn write_trace(path: &Path, report: &SolveReport) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = report
        .trace
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                i.to_string(),
                fmt_sig(e.x),
                fmt_sig(e.f),
                e.kind.as_str().to_string(),
                fmt_sig(e.bracket_left),
                fmt_sig(e.bracket_right),
            ]
        })
        .collect();
    write_rows(
        path,
        &header(&["iter", "x", "f", "step_kind", "bracket_left", "bracket_right"]),
        &rows,
    )
}

/// One row per subdivision cell.
pub fn write_boxes(path: &Path, report: &IsolationReport) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|b| {
            vec![
                fmt_sig(b.lo),
                fmt_sig(b.hi),
                fmt_sig(b.range_lo),
                fmt_sig(b.range_hi),
                b.contains_root.to_string(),
            ]
        })
        .collect();
    write_rows(
        path,
        &header(&["lo", "hi", "range_lo", "range_hi", "contains_root"]),
        &rows,
    )
}

/// Descent history: `step,w1..wd,rho,grad_norm`.
pub fn write_steps(path: &Path, report: &OptimReport) -> Result<(), CliError> {
    let d = report.weights.len();
    let mut cols = vec!["step".to_string()];
    cols.extend((1..=d).map(|i| format!("w{i}")));
    cols.push("rho".into());
    cols.push("grad_norm".into());
    let rows: Vec<Vec<String>> = report
        .history
        .iter()
        .map(|r| {
            let mut row = vec![r.step.to_string()];
            row.extend(r.weights.iter().map(|&w| fmt_sig(w)));
            row.push(fmt_sig(r.rho));
            row.push(fmt_sig(r.grad_norm));
            row
        })
        .collect();
    write_rows(path, &cols, &rows)
}
