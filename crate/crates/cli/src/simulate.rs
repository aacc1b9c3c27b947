//! Simulation presets written as datasets plus a metadata file.

use std::path::Path;

use clap::ValueEnum;
use fdepth::linalg::SquareMatrix;
use fdepth::simgen::{
    brownian_bridge_laplace_sample, fourier_gp_sample, matern_mixture, mvn_sample, simulation4_preset,
    two_bump_warped_sample, CoeffLaw, FourierBasis,
};
use fdepth::Grid;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataset::{default_ids, Dataset};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// One Matérn-1/2 path among 29 Matérn-3/2 paths.
    Sim1,
    /// 21 warped two-bump functions on [-3, 3], noisy middle function.
    Sim2,
    /// 100 Brownian-bridge-like paths with Laplace coefficients.
    Sim3,
    /// 45 Fourier inliers and 5 high-variance outliers.
    Sim4,
    /// 500 Fourier paths with decaying coefficient variances.
    Sim5,
    /// 50 bivariate normal points.
    Sim6,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Sim1 => "sim1",
            Preset::Sim2 => "sim2",
            Preset::Sim3 => "sim3",
            Preset::Sim4 => "sim4",
            Preset::Sim5 => "sim5",
            Preset::Sim6 => "sim6",
        }
    }
}

#[derive(Debug, Serialize)]
struct Metadata {
    preset: &'static str,
    seed: u64,
    rows: usize,
    columns: usize,
    /// Ids of the planted or otherwise special rows.
    flagged: Vec<String>,
    parameters: Value,
}

fn generate(preset: Preset, seed: u64) -> CliResult<(Dataset, Vec<usize>, Value)> {
    let (data, flagged, parameters) = match preset {
        Preset::Sim1 => {
            let mix = matern_mixture(101, 29, seed)?;
            let n = mix.sample.len();
            (
                Dataset::from_sample(&mix.sample, default_ids(n)),
                vec![mix.interloper],
                json!({"kernels": ["matern-1/2", "matern-3/2"], "length_scale": 1.0, "grid_points": 101}),
            )
        }
        Preset::Sim2 => {
            let s = two_bump_warped_sample(101, 21, seed)?;
            (
                Dataset::from_sample(&s.noisy, default_ids(s.noisy.len())),
                vec![s.middle],
                json!({"interval": [-3.0, 3.0], "noise_sd": 0.1, "warp_parameters": s.warp_parameters}),
            )
        }
        Preset::Sim3 => {
            let b = brownian_bridge_laplace_sample(101, 100, 1000, seed)?;
            (
                Dataset::from_sample(&b.sample, default_ids(b.sample.len())),
                vec![],
                json!({"coefficients": "laplace", "terms": 1000, "grid_points": 101}),
            )
        }
        Preset::Sim4 => {
            let s = simulation4_preset(Grid::unit(201)?, 100, seed)?;
            let flagged = s.outlier.iter().enumerate().filter(|(_, &o)| o).map(|(i, _)| i).collect();
            (
                Dataset::from_sample(&s.sample, default_ids(s.sample.len())),
                flagged,
                json!({"terms": 100, "inlier_variance": 1.0, "outlier_variance": 3.0, "grid_points": 201}),
            )
        }
        Preset::Sim5 => {
            let s = fourier_gp_sample(Grid::unit(201)?, FourierBasis::WithConstant, 10, CoeffLaw::DecayingNormal, 500, seed)?;
            (
                Dataset::from_sample(&s, default_ids(s.len())),
                vec![],
                json!({"terms": 10, "variances": CoeffLaw::DecayingNormal.variances(10), "grid_points": 201}),
            )
        }
        Preset::Sim6 => {
            let cov = SquareMatrix::from_rows(&[vec![1.0, 1.0 / 3.0], vec![1.0 / 3.0, 0.25]])?;
            let points = mvn_sample(&[0.0, 0.0], &cov, 50, seed)?;
            (
                Dataset { points: vec![1.0, 2.0], ids: default_ids(points.len()), rows: points },
                vec![],
                json!({"mean": [0.0, 0.0], "covariance": [[1.0, 1.0 / 3.0], [1.0 / 3.0, 0.25]]}),
            )
        }
    };
    Ok((data, flagged, parameters))
}

/// Writes `<out>/<preset>.csv` and `<out>/<preset>.json`.
pub fn run(preset: Preset, seed: u64, out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let (data, flagged, parameters) = generate(preset, seed)?;
    let meta = Metadata {
        preset: preset.name(),
        seed,
        rows: data.rows.len(),
        columns: data.width(),
        flagged: flagged.iter().map(|&i| data.ids[i].clone()).collect(),
        parameters,
    };
    data.write(&out.join(format!("{}.csv", preset.name())))?;
    let path = out.join(format!("{}.json", preset.name()));
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    std::fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))
}
