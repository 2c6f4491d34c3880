use std::path::Path;

use serde::Serialize;

use crate::RunError;

/// One asserted quantity: `pass` compares `measured` against `bound`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Criterion {
    /// Passes when `measured <= bound`.
    pub fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, bound, pass: measured <= bound }
    }

    pub fn at_least(name: &str, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, bound, pass: measured >= bound }
    }
}

/// Table and verdicts of one experiment.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    #[serde(skip)]
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<String>>,
    pub criteria: Vec<Criterion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, columns: &[&str]) -> Self {
        Self {
            experiment: experiment.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            criteria: Vec::new(),
            error: None,
        }
    }

    /// A report for an experiment that aborted.
    pub fn failed(experiment: &str, error: String) -> Self {
        let mut r = Self::new(experiment, &["error"]);
        r.rows.push(vec![error.clone()]);
        r.criteria.push(Criterion { name: "completed".into(), measured: 0.0, bound: 1.0, pass: false });
        r.error = Some(error);
        r
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.criteria.iter().all(|c| c.pass)
    }

    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), RunError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_summary(reports: &[ExperimentReport], path: &Path) -> Result<(), RunError> {
    let s = serde_json::to_string_pretty(reports)?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

/// Fixed-width scientific formatting for CSV cells.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}
