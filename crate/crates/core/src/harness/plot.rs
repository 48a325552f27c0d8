use std::fmt::Write as _;
use std::path::Path;

use crate::homogenization::ConvergenceReport;

use super::HarnessError;

/// One data line of the plot table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotRow {
    pub n: usize,
    pub l2_error: f64,
    pub energy: f64,
}

const HEADER: &str = "# N l2_error energy";

/// Whitespace-separated table with columns `N l2_error energy`, readable by
/// gnuplot (`plot 'f.dat' using 1:2` and `using 1:3`).
pub fn emit_plot_data(report: &ConvergenceReport, path: &Path) -> Result<(), HarnessError> {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in &report.rows {
        let _ = writeln!(s, "{} {:e} {:e}", r.n, r.l2_error, r.energy);
    }
    std::fs::write(path, s).map_err(|e| HarnessError::io(path, e))
}

pub fn parse_plot_data(text: &str) -> Result<Vec<PlotRow>, HarnessError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || HarnessError::Usage(format!("plot table line {}: `{line}`", i + 1));
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(bad());
        }
        rows.push(PlotRow {
            n: t[0].parse().map_err(|_| bad())?,
            l2_error: t[1].parse().map_err(|_| bad())?,
            energy: t[2].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}
