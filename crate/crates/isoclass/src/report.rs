//! Machine-readable reports: one JSON document plus one CSV per table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use isoclass_core::metaplectic::{Generator, GeneratorWord, Mat};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::IoError;

/// A rectangular table of measurements; written as a sibling CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_columns(name: &str, columns: Vec<String>) -> Self {
        Self { name: name.to_string(), columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One pass/fail check: `measured` compared against `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub measured: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub pass: bool,
}

impl Criterion {
    pub fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Self { name: name.to_string(), measured, comparison: Comparison::AtMost, threshold, pass: measured <= threshold }
    }

    pub fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        Self { name: name.to_string(), measured, comparison: Comparison::AtLeast, threshold, pass: measured >= threshold }
    }
}

/// One metaplectic generator in application order; matrices are lists of rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WordEntry {
    Dilation { b: Vec<Vec<f64>> },
    Shear { c: Vec<Vec<f64>> },
    Fourier,
}

impl WordEntry {
    pub fn from_word(w: &GeneratorWord) -> Vec<Self> {
        let rows = |m: &Mat| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        w.gens
            .iter()
            .map(|g| match g {
                Generator::Dilation(b) => Self::Dilation { b: rows(b) },
                Generator::Shear(c) => Self::Shear { c: rows(c) },
                Generator::Fourier => Self::Fourier,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tables: Vec<Table>,
    /// Fitted slopes and constants by name.
    pub fits: BTreeMap<String, f64>,
    pub criteria: Vec<Criterion>,
    /// Generator words, one per factored input matrix.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub words: Vec<Vec<WordEntry>>,
    /// Binary dumps written next to the report, by file name.
    pub artifacts: Vec<String>,
    /// Harness error that stopped the run early.
    pub error: Option<String>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
}

impl Report {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.name().to_string(),
            config: config.clone(),
            seed: None,
            tables: Vec::new(),
            fits: BTreeMap::new(),
            criteria: Vec::new(),
            words: Vec::new(),
            artifacts: Vec::new(),
            error: None,
            pass: false,
            wall_clock_seconds: None,
            timestamp_unix: None,
        }
    }

    /// Pass iff no error occurred and every criterion holds.
    pub fn finalize(&mut self) {
        self.pass = self.error.is_none() && self.criteria.iter().all(|c| c.pass);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).unwrap_or_else(|e| unreachable!("report serialization: {e}"));
        s.push('\n');
        s
    }
}

/// `<dir>/<stem>.<table>.csv` for a report written to `<dir>/<stem>.json`.
pub fn table_path(report_path: &Path, table: &str) -> PathBuf {
    let stem = report_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report_path.with_file_name(format!("{stem}.{table}.csv"))
}

/// Write the JSON report and its sibling CSV tables; returns every path written.
pub fn write_report(report: &Report, path: &Path) -> Result<Vec<PathBuf>, IoError> {
    let parent = match path.parent() {
        Some(p) if p.as_os_str().is_empty() => Path::new("."),
        Some(p) => p,
        None => return Err(IoError::MissingParent(path.to_path_buf())),
    };
    if !parent.is_dir() {
        return Err(IoError::MissingParent(path.to_path_buf()));
    }
    std::fs::write(path, report.to_json()).map_err(|e| IoError::path(path, e))?;
    let mut written = vec![path.to_path_buf()];
    for t in &report.tables {
        let p = table_path(path, &t.name);
        write_table(t, &p)?;
        written.push(p);
    }
    Ok(written)
}

fn write_table(t: &Table, path: &Path) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| IoError::csv(path, e))?;
    w.write_record(&t.columns).map_err(|e| IoError::csv(path, e))?;
    for row in &t.rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| IoError::csv(path, e))?;
    }
    w.flush().map_err(|e| IoError::path(path, e))
}
