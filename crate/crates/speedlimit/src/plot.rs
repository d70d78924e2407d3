//! Tab-separated plot data with a commented two-line header (names, units).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use speedlimit_core::SpeedLimitReport;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
}

pub const fn column(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub title: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotTable {
    pub fn new(title: impl Into<String>, columns: Vec<Column>) -> Self {
        Self {
            title: title.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// Renders the table. Numbers use 17 significant digits; missing values
    /// are written as `nan`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.title);
        let names: Vec<&str> = self.columns.iter().map(|c| c.name).collect();
        let units: Vec<&str> = self.columns.iter().map(|c| c.unit).collect();
        let _ = writeln!(out, "# {}", names.join("\t"));
        let _ = writeln!(out, "# {}", units.join("\t"));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out
    }
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn emit_plot_data(table: &PlotTable, path: &Path) -> Result<()> {
    if table.rows.is_empty() {
        return Err(HarnessError::Config(format!(
            "refusing to write empty plot data to {}",
            path.display()
        )));
    }
    fs::write(path, table.render()).map_err(|e| HarnessError::io(path, e))
}

/// Columns of a speed-limit series indexed by elapsed time.
pub fn report_columns() -> Vec<Column> {
    vec![
        column("t", "time"),
        column("w2_sq", "weight^2"),
        column("entropy", "loss"),
        column("t_sl", "time"),
        column("inefficiency", "1"),
        column("l_gamma", "weight"),
        column("l_geo", "weight"),
    ]
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

pub fn report_row(t: f64, r: &SpeedLimitReport) -> Vec<f64> {
    vec![
        t,
        r.w2_sq,
        r.entropy,
        opt(r.t_sl),
        opt(r.inefficiency),
        opt(r.path_length),
        r.geo_length,
    ]
}

pub fn report_table(title: impl Into<String>, reports: &[(f64, SpeedLimitReport)]) -> PlotTable {
    let mut table = PlotTable::new(title, report_columns());
    for (t, r) in reports {
        table.push(report_row(*t, r));
    }
    table
}

/// Serializable mirror of [`SpeedLimitReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRecord {
    pub horizon: Option<f64>,
    pub w2_sq: f64,
    pub entropy: f64,
    pub entropy_scale: f64,
    pub t_sl: Option<f64>,
    pub inefficiency: Option<f64>,
    pub path_length: Option<f64>,
    pub geo_length: f64,
    pub length_ratio: Option<f64>,
    pub sub_unity: bool,
    pub entropy_invalid: bool,
}

impl From<&SpeedLimitReport> for ReportRecord {
    fn from(r: &SpeedLimitReport) -> Self {
        Self {
            horizon: r.horizon,
            w2_sq: r.w2_sq,
            entropy: r.entropy,
            entropy_scale: r.entropy_scale,
            t_sl: r.t_sl,
            inefficiency: r.inefficiency,
            path_length: r.path_length,
            geo_length: r.geo_length,
            length_ratio: r.length_ratio,
            sub_unity: r.flags.sub_unity,
            entropy_invalid: r.flags.entropy_invalid,
        }
    }
}
