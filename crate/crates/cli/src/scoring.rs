//! Shared depth-scoring logic for the `depth` and `outliers` commands.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use fdepth::depth::{score, Method};
use fdepth::warping::{karcher_mean, KARCHER_MAX_ITER, KARCHER_TOL};
use fdepth::{Criterion, DepthResult, FunctionalSample, GridFunction, KlModel, MultivariateModel, Sampler, WeightKind};

use crate::dataset::Dataset;
use crate::error::{CliError, CliResult};
use crate::model::{ModelBody, ModelFile};
use crate::report::{write_plot, DepthEntry, DepthReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Lp,
    DerivativeLp,
    ModifiedRkhs,
    Rkhs,
    WarpL2,
    FisherRao,
    Mahalanobis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    MonteCarlo,
    SampleAverage,
    Halfspace,
    ChiSquare,
}

impl EstimatorArg {
    fn name(self) -> &'static str {
        match self {
            EstimatorArg::MonteCarlo => "monte-carlo",
            EstimatorArg::SampleAverage => "sample-average",
            EstimatorArg::Halfspace => "halfspace",
            EstimatorArg::ChiSquare => "chi-square",
        }
    }

    fn is_closed_form(self) -> bool {
        matches!(self, EstimatorArg::Halfspace | EstimatorArg::ChiSquare)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Bootstrap,
    Gaussian,
}

impl From<SamplerArg> for Sampler {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Bootstrap => Sampler::Bootstrap,
            SamplerArg::Gaussian => Sampler::Gaussian,
        }
    }
}

/// Parses `constant-one`, `inverse-p`, `inverse-sqrt-log` or `power:<s>`.
pub fn parse_weights(s: &str) -> Result<WeightKind, String> {
    match s {
        "constant-one" => Ok(WeightKind::ConstantOne),
        "inverse-p" => Ok(WeightKind::InverseP),
        "inverse-sqrt-log" => Ok(WeightKind::InverseSqrtLog),
        _ => match s.strip_prefix("power:") {
            Some(v) => v.parse().map(WeightKind::Power).map_err(|_| format!("bad exponent in '{s}'")),
            None => Err(format!("unknown weights '{s}'; expected constant-one, inverse-p, inverse-sqrt-log or power:<s>")),
        },
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScoringArgs {
    /// Criterion function. Defaults to modified-rkhs for functional models,
    /// rkhs for closed-form estimators and mahalanobis for multivariate models.
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,

    /// Exponent for lp and derivative-lp.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,

    /// Derivative order for derivative-lp.
    #[arg(long, default_value_t = 1)]
    pub order: u32,

    /// Weights a_p of the modified RKHS norm: constant-one, inverse-p, inverse-sqrt-log or power:<s>.
    #[arg(long, default_value = "inverse-p", value_parser = parse_weights)]
    pub weights: WeightKind,

    /// Permit constant-one weights on the modified RKHS norm.
    #[arg(long)]
    pub allow_divergent: bool,

    #[arg(long, value_enum, default_value_t = EstimatorArg::MonteCarlo)]
    pub estimator: EstimatorArg,

    /// How Monte Carlo reference coefficients are drawn.
    #[arg(long, value_enum, default_value_t = SamplerArg::Bootstrap)]
    pub sampler: SamplerArg,

    /// Monte Carlo reference size.
    #[arg(long = "N", visible_alias = "n", default_value_t = fdepth::depth::DEFAULT_N)]
    pub n: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Centre f_c: `mean`, `zero`, `template` (Karcher mean of the fitting
    /// sample), or a CSV file holding one row on the model grid.
    #[arg(long)]
    pub fc: Option<String>,

    /// Long-format CSV (id, t, value, depth) for plotting.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

/// Observations to score: ids, raw rows and the column labels they came with.
pub struct Queries {
    pub ids: Vec<String>,
    pub points: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl Queries {
    pub fn from_dataset(d: &Dataset) -> Self {
        Self { ids: d.ids.clone(), points: d.points.clone(), rows: d.rows.clone() }
    }
}

pub fn run(model: &ModelFile, queries: Queries, args: &ScoringArgs, alpha: f64) -> CliResult<DepthReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CliError::config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if args.n == 0 {
        return Err(CliError::config("--N must be positive"));
    }
    let (results, delta, weights) = match &model.body {
        ModelBody::Functional(file) => {
            let loaded = file.load()?;
            let dataset = Dataset { points: queries.points.clone(), ids: queries.ids.clone(), rows: queries.rows.clone() };
            let fs = dataset.functions_on(loaded.model.grid())?;
            let (results, weights) = functional(&loaded.model, &loaded.sample, &fs, args)?;
            (results, Some(loaded.model.system().delta()), weights)
        }
        ModelBody::Multivariate(file) => {
            if queries.points.len() != file.columns.len() {
                return Err(CliError::new(
                    crate::error::exit::GRID_MISMATCH,
                    format!("model has {} columns, queries have {}", file.columns.len(), queries.points.len()),
                ));
            }
            (multivariate(&file.load()?, &file.sample, &queries.rows, args)?, None, None)
        }
    };
    let criterion = match results.first() {
        Some(r) => r.criterion.clone(),
        None => String::new(),
    };
    let n = results.first().map_or(0, |r| r.n);
    let report = DepthReport {
        criterion,
        estimator: args.estimator.name().into(),
        n,
        seed: args.seed,
        delta,
        weights,
        alpha,
        results: queries
            .ids
            .iter()
            .zip(&results)
            .map(|(id, r)| DepthEntry {
                id: id.clone(),
                depth: r.value,
                criterion_value: r.criterion_value,
                outlier: alpha >= 1.0 || r.value < alpha,
            })
            .collect(),
    };
    if let Some(path) = &args.plot {
        write_plot(path, &report, &queries.points, &queries.rows)?;
    }
    Ok(report)
}

fn functional(
    model: &KlModel,
    sample: &FunctionalSample,
    queries: &[GridFunction],
    args: &ScoringArgs,
) -> CliResult<(Vec<DepthResult>, Option<String>)> {
    let kind = args.criterion.unwrap_or(if args.estimator.is_closed_form() {
        CriterionArg::Rkhs
    } else {
        CriterionArg::ModifiedRkhs
    });
    let system = Arc::new(model.system().clone());
    let criterion = match kind {
        CriterionArg::Lp => Criterion::lp(args.p)?,
        CriterionArg::DerivativeLp => Criterion::derivative_lp(args.order, args.p)?,
        CriterionArg::ModifiedRkhs => Criterion::modified_rkhs(system, args.weights, args.allow_divergent)
            .map_err(|e| match e {
                fdepth::DepthError::DivergentWeights => CliError::config(
                    "constant-one weights diverge on infinite-dimensional models; pass --allow-divergent to use them",
                ),
                other => other.into(),
            })?,
        CriterionArg::Rkhs => Criterion::Rkhs { system },
        CriterionArg::WarpL2 => Criterion::WarpL2,
        CriterionArg::FisherRao => Criterion::WarpFisherRao,
        CriterionArg::Mahalanobis => {
            return Err(CliError::config("the mahalanobis criterion needs a multivariate model"));
        }
    };
    if args.estimator.is_closed_form() && kind != CriterionArg::Rkhs {
        return Err(CliError::config(format!(
            "the {} estimator is a closed form of the rkhs criterion",
            args.estimator.name()
        )));
    }
    let weights = matches!(criterion, Criterion::ModifiedRkhs { .. }).then(|| args.weights.to_string());
    let f_c = centre(args.fc.as_deref(), &criterion, model, sample)?;
    let method = match args.estimator {
        EstimatorArg::MonteCarlo => Method::MonteCarlo { sampler: args.sampler.into(), n: args.n, seed: args.seed },
        EstimatorArg::SampleAverage => Method::SampleAverage,
        EstimatorArg::Halfspace => Method::Halfspace,
        EstimatorArg::ChiSquare => Method::ChiSquare,
    };
    Ok((score(model, sample, queries, &f_c, &criterion, method)?, weights))
}

fn centre(spec: Option<&str>, criterion: &Criterion, model: &KlModel, sample: &FunctionalSample) -> CliResult<GridFunction> {
    let spec = spec.unwrap_or(if criterion.is_norm() { "mean" } else { "template" });
    match spec {
        "mean" => Ok(model.mean().clone()),
        "zero" => Ok(GridFunction::zeros(*model.grid())),
        "template" => Ok(karcher_mean(sample, KARCHER_MAX_ITER, KARCHER_TOL)?.template),
        path => {
            let d = Dataset::read(path.as_ref())?;
            if d.rows.len() != 1 {
                return Err(CliError::format(format!("{path}: centre file must hold exactly one row")));
            }
            Ok(d.functions_on(model.grid())?.remove(0))
        }
    }
}

fn multivariate(
    model: &MultivariateModel,
    sample: &[Vec<f64>],
    queries: &[Vec<f64>],
    args: &ScoringArgs,
) -> CliResult<Vec<DepthResult>> {
    if let Some(c) = args.criterion {
        if c != CriterionArg::Mahalanobis {
            return Err(CliError::config("multivariate models support only the mahalanobis criterion"));
        }
    }
    if let Some(fc) = args.fc.as_deref() {
        if fc != "mean" {
            return Err(CliError::config("multivariate models are centred at their mean"));
        }
    }
    let reference = match args.estimator {
        EstimatorArg::MonteCarlo => model.mc_reference(args.sampler.into(), args.n, args.seed)?,
        EstimatorArg::SampleAverage => model.sample_reference(sample)?,
        EstimatorArg::ChiSquare => {
            return queries.iter().map(|x| Ok(model.closed_form_depth(x)?)).collect();
        }
        EstimatorArg::Halfspace => {
            return Err(CliError::config("the halfspace closed form applies to functional models only"));
        }
    };
    queries.iter().map(|x| Ok(model.depth(x, &reference)?)).collect()
}
