//! `fdepth`: norm-based depth for functional and multivariate data.

mod dataset;
mod error;
mod model;
mod report;
mod scoring;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdepth::warping::{fisher_rao_distance, karcher_mean, warp_l2_distance, KARCHER_MAX_ITER, KARCHER_TOL};
use fdepth::{FitOptions, KlModel, MultivariateModel};
use serde::Serialize;

use dataset::Dataset;
use error::{CliError, CliResult};
use model::ModelFile;
use scoring::{Queries, ScoringArgs};

#[derive(Debug, Parser)]
#[command(name = "fdepth", version, about = "Norm-based depth for functional data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a Karhunen–Loève model (or a multivariate normal model) to a dataset.
    Fit(FitArgs),
    /// Score query observations against a fitted model.
    Depth(DepthArgs),
    /// Score the fitting sample (or another dataset) and flag low-depth rows.
    Outliers(OutlierArgs),
    /// Write a simulated dataset and its metadata.
    Simulate(SimulateArgs),
    /// Align a sample to its Karcher mean.
    Align(AlignArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    input: PathBuf,
    /// Model file to write.
    #[arg(short, long)]
    out: PathBuf,
    /// Eigenvalue truncation threshold; defaults to lambda_1 / max(1, sqrt(n) ln n), at least 1e-8.
    #[arg(long)]
    delta: Option<f64>,
    /// Subtract the sample mean before decomposing (default).
    #[arg(long, overrides_with = "no_center")]
    center: bool,
    /// Decompose the raw second-moment kernel.
    #[arg(long)]
    no_center: bool,
}

#[derive(Debug, Args)]
struct DepthArgs {
    #[arg(short, long)]
    model: PathBuf,
    query: PathBuf,
    /// Depth threshold below which a row is marked as an outlier.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Debug, Args)]
struct OutlierArgs {
    #[arg(short, long)]
    model: PathBuf,
    /// Dataset to screen; the fitting sample when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    preset: simulate::Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AlignArgs {
    input: PathBuf,
    #[arg(long)]
    out_template: PathBuf,
    #[arg(long)]
    out_warpings: PathBuf,
}

fn fit(args: &FitArgs) -> CliResult<()> {
    let data = Dataset::read(&args.input)?;
    if let Some(d) = args.delta {
        if !(d > 0.0 && d.is_finite()) {
            return Err(CliError::config(format!("--delta must be positive, got {d}")));
        }
    }
    let file = if data.is_multivariate() {
        let m = MultivariateModel::fit(&data.rows)?;
        eprintln!("multivariate model: d = {}, n = {}", m.dim(), data.rows.len());
        ModelFile::multivariate(&m, &data)
    } else {
        let options = FitOptions { center: !args.no_center, delta: args.delta };
        let model = KlModel::fit(&data.sample()?, &options)?;
        eprintln!(
            "functional model: n = {}, m = {}, C = {}, delta = {:e}",
            data.rows.len(),
            data.width(),
            model.system().count(),
            model.system().delta()
        );
        ModelFile::functional(&model, &data)
    };
    file.write(&args.out)
}

fn depth(args: &DepthArgs) -> CliResult<()> {
    let model = ModelFile::read(&args.model)?;
    let query = Dataset::read(&args.query)?;
    let report = scoring::run(&model, Queries::from_dataset(&query), &args.scoring, args.alpha)?;
    println!("{}", report.to_json());
    Ok(())
}

fn outliers(args: &OutlierArgs) -> CliResult<()> {
    let model = ModelFile::read(&args.model)?;
    let queries = match &args.input {
        Some(path) => Queries::from_dataset(&Dataset::read(path)?),
        None => match &model.body {
            model::ModelBody::Functional(f) => Queries {
                ids: f.ids.clone(),
                points: f.grid()?.points(),
                rows: f.sample.clone(),
            },
            model::ModelBody::Multivariate(f) => Queries {
                ids: f.ids.clone(),
                points: f.columns.clone(),
                rows: f.sample.clone(),
            },
        },
    };
    let report = scoring::run(&model, queries, &args.scoring, args.alpha)?;
    println!("{}", report.to_json());
    Ok(())
}

#[derive(Serialize)]
struct AlignmentEntry {
    id: String,
    warp_l2: f64,
    fisher_rao: f64,
}

#[derive(Serialize)]
struct AlignmentSummary {
    iterations: usize,
    converged: bool,
    results: Vec<AlignmentEntry>,
}

fn align(args: &AlignArgs) -> CliResult<()> {
    let data = Dataset::read(&args.input)?;
    if data.is_multivariate() {
        return Err(CliError::format("alignment needs functional data with at least 3 grid points"));
    }
    let km = karcher_mean(&data.sample()?, KARCHER_MAX_ITER, KARCHER_TOL)?;
    let template = Dataset { points: data.points.clone(), ids: vec!["template".into()], rows: vec![km.template.values().to_vec()] };
    template.write(&args.out_template)?;
    let unit = km.warpings[0].grid().points();
    let warpings = Dataset {
        points: unit,
        ids: data.ids.clone(),
        rows: km.warpings.iter().map(|w| w.values().to_vec()).collect(),
    };
    warpings.write(&args.out_warpings)?;
    let summary = AlignmentSummary {
        iterations: km.iterations,
        converged: km.converged,
        results: data
            .ids
            .iter()
            .zip(&km.warpings)
            .map(|(id, w)| AlignmentEntry { id: id.clone(), warp_l2: warp_l2_distance(w), fisher_rao: fisher_rao_distance(w) })
            .collect(),
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("FDEPTH_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::config(format!("FDEPTH_THREADS must be a positive integer, got '{value}'")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Fit(a) => fit(a),
        Command::Depth(a) => depth(a),
        Command::Outliers(a) => outliers(a),
        Command::Simulate(a) => simulate::run(a.preset, a.seed, &a.out),
        Command::Align(a) => align(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(error::exit::CONFIG as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
