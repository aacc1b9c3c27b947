use std::fs::File;
use std::path::Path;

use serde::Serialize;

use crate::dataset::format_value;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DepthEntry {
    pub id: String,
    pub depth: f64,
    pub criterion_value: f64,
    pub outlier: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DepthReport {
    pub criterion: String,
    pub estimator: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub delta: Option<f64>,
    pub weights: Option<String>,
    pub alpha: f64,
    pub results: Vec<DepthEntry>,
}

impl DepthReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Long-format plot data: one line per (observation, grid point).
pub fn write_plot(path: &Path, report: &DepthReport, points: &[f64], rows: &[Vec<f64>]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut write = || -> csv::Result<()> {
        w.write_record(["id", "t", "value", "depth"])?;
        for (entry, row) in report.results.iter().zip(rows) {
            let depth = format_value(entry.depth);
            for (t, v) in points.iter().zip(row) {
                w.write_record([entry.id.as_str(), &format_value(*t), &format_value(*v), &depth])?;
            }
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| CliError::io(path, e))
}
