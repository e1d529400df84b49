//! CSV tables and the residual report.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl Cell {
    /// Floats carry 17 significant digits so they round-trip exactly.
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    /// Appended to the scenario name to form the file name.
    pub suffix: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(suffix: &'static str, header: &[&'static str]) -> Self {
        Self { suffix, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self, stem: &str) -> String {
        format!("{stem}{}.csv", self.suffix)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        // NaN never passes
        let pass = value <= tolerance;
        Self { name: name.into(), value, tolerance, comparison: Comparison::AtMost, pass }
    }

    pub fn above(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let pass = value > tolerance;
        Self { name: name.into(), value, tolerance, comparison: Comparison::Above, pass }
    }
}

/// Everything one scenario produces.
#[derive(Debug, Clone)]
pub struct Output {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Serialize)]
pub struct ScenarioReport<'a> {
    pub name: &'a str,
    pub scenario: &'a str,
    pub files: Vec<String>,
    pub pass: bool,
    pub checks: &'a [Check],
    pub quantities: &'a BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub pass: bool,
    pub scenarios: Vec<ScenarioReport<'a>>,
}

impl Report<'_> {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}
