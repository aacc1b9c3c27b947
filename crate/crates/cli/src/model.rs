//! JSON model container written by `fit` and read by `depth` and `outliers`.
//!
//! Functional models keep the grid, the retained eigenpairs, the coefficient
//! matrix of the fitting sample, the truncation threshold and the sample mean.
//! The fitting sample itself is kept too, for sample-average depths and
//! Karcher templates. Multivariate models keep the points, their mean and
//! covariance.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use fdepth::covkernel::{truncate, CoefficientMatrix, EigenSystem, KlModel};
use fdepth::linalg::SquareMatrix;
use fdepth::{FunctionalSample, Grid, GridFunction, MultivariateModel};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CliError, CliResult};

pub const FORMAT: &str = "fdepth-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FunctionalModelFile {
    pub grid: GridSpec,
    pub centered: bool,
    pub delta: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
    pub coefficients: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub ids: Vec<String>,
    pub sample: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MultivariateModelFile {
    pub columns: Vec<f64>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub ids: Vec<String>,
    pub sample: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelBody {
    Functional(FunctionalModelFile),
    Multivariate(MultivariateModelFile),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub body: ModelBody,
}

impl ModelFile {
    pub fn functional(model: &KlModel, data: &Dataset) -> Self {
        let grid = model.grid();
        let system = model.system();
        Self::wrap(ModelBody::Functional(FunctionalModelFile {
            grid: GridSpec { start: grid.start(), end: grid.end(), points: grid.len() },
            centered: model.centered(),
            delta: system.delta(),
            eigenvalues: system.eigenvalues().to_vec(),
            eigenfunctions: system.eigenfunctions().iter().map(|f| f.values().to_vec()).collect(),
            coefficients: model.coefficients().iter_rows().map(<[f64]>::to_vec).collect(),
            mean: model.mean().values().to_vec(),
            ids: data.ids.clone(),
            sample: data.rows.clone(),
        }))
    }

    pub fn multivariate(model: &MultivariateModel, data: &Dataset) -> Self {
        let d = model.dim();
        let cov = model.covariance();
        Self::wrap(ModelBody::Multivariate(MultivariateModelFile {
            columns: data.points.clone(),
            mean: model.mean().to_vec(),
            covariance: (0..d).map(|i| (0..d).map(|j| cov.get(i, j)).collect()).collect(),
            ids: data.ids.clone(),
            sample: data.rows.clone(),
        }))
    }

    fn wrap(body: ModelBody) -> Self {
        Self { format: FORMAT.into(), version: VERSION, body }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let model: Self = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
        if model.format != FORMAT || model.version != VERSION {
            return Err(CliError::format(format!(
                "{}: not a {FORMAT} version {VERSION} file",
                path.display()
            )));
        }
        Ok(model)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        std::fs::write(path, json + "\n").map_err(|e| CliError::io(path, e))
    }
}

/// A functional model restored from its file.
pub struct LoadedFunctional {
    pub model: KlModel,
    pub sample: FunctionalSample,
}

impl FunctionalModelFile {
    pub fn grid(&self) -> CliResult<Grid> {
        Ok(Grid::new(self.grid.start, self.grid.end, self.grid.points)?)
    }

    pub fn load(&self) -> CliResult<LoadedFunctional> {
        let grid = self.grid()?;
        let phis = self
            .eigenfunctions
            .iter()
            .map(|v| GridFunction::new(grid, v.clone()))
            .collect::<fdepth::Result<Vec<_>>>()?;
        let full = EigenSystem::from_parts(self.eigenvalues.clone(), phis)?;
        let system = truncate(&full, self.delta, full.count())?;
        let coefficients = CoefficientMatrix::from_rows(self.coefficients.clone())?;
        let mean = GridFunction::new(grid, self.mean.clone())?;
        let model = KlModel::from_parts(mean, self.centered, system, coefficients)?;
        let sample = FunctionalSample::from_rows(grid, self.sample.clone())?;
        if self.ids.len() != sample.len() {
            return Err(CliError::format("model ids and sample rows differ in number"));
        }
        Ok(LoadedFunctional { model, sample })
    }
}

impl MultivariateModelFile {
    /// Refits from the stored points and checks the stored moments agree.
    pub fn load(&self) -> CliResult<MultivariateModel> {
        let model = MultivariateModel::fit(&self.sample)?;
        let stored = SquareMatrix::from_rows(&self.covariance)?;
        let cov = model.covariance();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        let same_cov = stored.dim() == cov.dim()
            && (0..cov.dim()).all(|i| (0..cov.dim()).all(|j| close(stored.get(i, j), cov.get(i, j))));
        let same_mean = self.mean.len() == model.dim() && self.mean.iter().zip(model.mean()).all(|(a, b)| close(*a, *b));
        if !(same_cov && same_mean) {
            return Err(CliError::format("stored mean or covariance does not match the stored sample"));
        }
        Ok(model)
    }
}
