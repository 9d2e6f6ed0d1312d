//! Experiment results and their files: one CSV per table plus `summary.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ips_core::stats::Estimate;
use serde::Serialize;

use crate::config::Experiment;
use crate::LabError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    /// Integers in decimal, floats with 17 significant digits.
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &'static [&'static str]) -> Self {
        Table { name, columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table `{}`", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            writeln!(s, "{}", cells.join(",")).expect("writing to a String");
        }
        s
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "insufficient data")]
    InsufficientData,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail | Status::InsufficientData => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Named {
    pub name: String,
    pub value: f64,
    pub se: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flag {
    pub name: String,
    pub pass: bool,
    /// The rule, stated in terms of entries of the estimates table.
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub version: &'static str,
}

/// Everything a run produced. Estimates are also written as the
/// `estimates` table, so every flag can be recomputed from the CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub experiment: Experiment,
    pub status: Status,
    pub estimates: Vec<Named>,
    pub flags: Vec<Flag>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'static str,
    status: Status,
    estimates: &'a [Named],
    flags: &'a [Flag],
    tables: Vec<String>,
    notes: &'a [String],
    provenance: &'a Provenance,
}

pub const ESTIMATE_COLUMNS: &[&str] = &["name", "value", "se", "n"];

impl ExperimentResult {
    pub fn estimate(&self, name: &str) -> Option<&Named> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        self.flags.iter().find(|f| f.name == name).map(|f| f.pass)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    fn estimates_table(&self) -> Table {
        let mut t = Table::new("estimates", ESTIMATE_COLUMNS);
        for e in &self.estimates {
            t.push(vec![e.name.as_str().into(), e.value.into(), e.se.into(), e.n.into()]);
        }
        t
    }

    /// File name and contents of every output, in a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut all: Vec<Table> = vec![self.estimates_table()];
        all.extend(self.tables.iter().cloned());
        let summary = Summary {
            experiment: self.experiment.name(),
            status: self.status,
            estimates: &self.estimates,
            flags: &self.flags,
            tables: all.iter().map(Table::file_name).collect(),
            notes: &self.notes,
            provenance: &self.provenance,
        };
        let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        json.push('\n');
        let mut out = vec![("summary.json".to_string(), json)];
        out.extend(all.iter().map(|t| (t.file_name(), t.to_csv())));
        out
    }

    /// Writes every output file into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, LabError> {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        let mut written = Vec::new();
        for (name, body) in self.files() {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| LabError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Accumulates estimates, flags and tables while an experiment runs.
#[derive(Debug, Default)]
pub struct Report {
    pub estimates: Vec<Named>,
    pub flags: Vec<Flag>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn est(&mut self, name: &str, e: Estimate) {
        self.estimates.push(Named { name: name.to_string(), value: e.value, se: e.se, n: e.n });
    }

    /// A quantity without a standard error.
    pub fn scalar(&mut self, name: &str, value: f64) {
        self.estimates.push(Named { name: name.to_string(), value, se: f64::NAN, n: 0 });
    }

    pub fn count(&mut self, name: &str, value: u64) {
        self.scalar(name, value as f64);
    }

    pub fn flag(&mut self, name: &str, pass: bool, rule: &str) {
        self.flags.push(Flag { name: name.to_string(), pass, rule: rule.to_string() });
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}
