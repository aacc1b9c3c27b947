//! CSV datasets: a header `t,<t_0>,<t_1>,...` followed by rows `<id>,<v_0>,<v_1>,...`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use fdepth::{FunctionalSample, Grid, GridFunction};

use crate::error::{exit, CliError, CliResult};

/// Relative tolerance on grid spacing uniformity.
const UNIFORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<f64>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn at_line(line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::format(format!("line {line}: {msg}"))
}

fn parse_value(cell: &str, line: u64, column: usize) -> CliResult<f64> {
    let v: f64 = cell.parse().map_err(|_| at_line(line, format!("column {}: '{cell}' is not a number", column + 1)))?;
    if !v.is_finite() {
        return Err(at_line(line, format!("column {}: non-finite value", column + 1)));
    }
    Ok(v)
}

impl Dataset {
    pub fn read(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(file).map_err(|e| CliError::new(e.code, format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(reader: impl Read) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(r) => r.map_err(|e| CliError::format(e.to_string()))?,
            None => return Err(CliError::format("line 1: empty file")),
        };
        if header.get(0) != Some("t") {
            return Err(at_line(1, "first header cell must be 't'"));
        }
        if header.len() < 2 {
            return Err(at_line(1, "header has no grid points"));
        }
        let points = header.iter().enumerate().skip(1).map(|(k, c)| parse_value(c, 1, k)).collect::<CliResult<Vec<f64>>>()?;
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(at_line(1, "grid points must be strictly increasing"));
        }
        if points.len() >= 3 {
            let h = (points[points.len() - 1] - points[0]) / (points.len() - 1) as f64;
            if points.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > UNIFORM_TOL * h.abs()) {
                return Err(at_line(1, "grid points must be uniformly spaced"));
            }
        }

        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for record in records {
            let record = record.map_err(|e| CliError::format(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() == 1 && record.get(0) == Some("") {
                continue;
            }
            if record.len() != header.len() {
                return Err(at_line(line, format!("expected {} fields, found {}", header.len(), record.len())));
            }
            ids.push(record[0].to_string());
            rows.push(record.iter().enumerate().skip(1).map(|(k, c)| parse_value(c, line, k)).collect::<CliResult<_>>()?);
        }
        if rows.is_empty() {
            return Err(CliError::format("no data rows"));
        }
        Ok(Self { points, ids, rows })
    }

    pub fn width(&self) -> usize {
        self.points.len()
    }

    /// Fewer than three columns are read as points in `R^d` rather than functions.
    pub fn is_multivariate(&self) -> bool {
        self.points.len() < 3
    }

    pub fn grid(&self) -> CliResult<Grid> {
        Ok(Grid::new(self.points[0], self.points[self.points.len() - 1], self.points.len())?)
    }

    /// Rows as functions on `grid`, which must match the header within tolerance.
    pub fn functions_on(&self, grid: &Grid) -> CliResult<Vec<GridFunction>> {
        if !same_grid(&self.points, grid) {
            return Err(CliError::new(
                exit::GRID_MISMATCH,
                format!(
                    "grid mismatch: data has {} points on [{}, {}], model has {} points on [{}, {}]",
                    self.points.len(),
                    self.points[0],
                    self.points[self.points.len() - 1],
                    grid.len(),
                    grid.start(),
                    grid.end()
                ),
            ));
        }
        Ok(self.rows.iter().map(|r| GridFunction::new(*grid, r.clone())).collect::<fdepth::Result<_>>()?)
    }

    pub fn sample(&self) -> CliResult<FunctionalSample> {
        let grid = self.grid()?;
        Ok(FunctionalSample::from_rows(grid, self.rows.clone())?)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        self.write_to(file).map_err(|e| CliError::io(path, e))
    }

    pub fn write_to(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.points.iter().map(|v| format_value(*v)));
        w.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| format_value(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_sample(sample: &FunctionalSample, ids: Vec<String>) -> Self {
        Self {
            points: sample.grid().points(),
            ids,
            rows: sample.rows().iter().map(|f| f.values().to_vec()).collect(),
        }
    }
}

/// Seventeen significant digits, enough to reproduce any `f64` exactly.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Ids `1..=n`.
pub fn default_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

fn same_grid(points: &[f64], grid: &Grid) -> bool {
    if points.len() != grid.len() {
        return false;
    }
    let tol = UNIFORM_TOL * (grid.end() - grid.start()).abs().max(1.0);
    (points[0] - grid.start()).abs() <= tol && (points[points.len() - 1] - grid.end()).abs() <= tol
}
