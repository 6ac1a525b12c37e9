//! CSV report writing.
//!
//! Two fixed schemas: metric curves
//! (`combination,battery_case,threshold_m,threshold_cm,value`) and
//! cumulative traces (`view_index,error_m`). Numbers are printed with nine
//! significant digits in scientific notation, lines end with LF, and the
//! first line surfaces the seed that produced the data, so identical runs
//! are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One row of a metric curve. `x_m` is the threshold (repeatability curves)
/// or descriptor radius (success and misalignment curves), metres; the
/// writer derives the centimetre convenience column.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub combination: String,
    pub battery_case: String,
    pub x_m: f64,
    pub value: f64,
}

/// One row of a cumulative-error trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub view_index: usize,
    pub error_m: f64,
}

fn seed_line(seed: u64) -> String {
    format!("# seed: {seed}\n")
}

/// Render a curve CSV (see module docs for the schema).
pub fn curve_csv(seed: u64, rows: &[CurveRow]) -> String {
    let mut out = seed_line(seed);
    out.push_str("combination,battery_case,threshold_m,threshold_cm,value\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{:.8e},{:.8e},{:.8e}",
            row.combination,
            row.battery_case,
            row.x_m,
            row.x_m * 100.0,
            row.value
        );
    }
    out
}

/// Render a cumulative-error trace CSV.
pub fn trace_csv(seed: u64, rows: &[TraceRow]) -> String {
    let mut out = seed_line(seed);
    out.push_str("view_index,error_m\n");
    for row in rows {
        let _ = writeln!(out, "{},{:.8e}", row.view_index, row.error_m);
    }
    out
}

/// Write rendered text to disk.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
