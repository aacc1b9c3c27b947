//! Depth estimators: Monte Carlo against a synthetic reference set, sample
//! average against the fitting sample, and Gaussian closed forms.

use std::fmt;

use rand::Rng;

use crate::covkernel::{kl_project, CoefficientMatrix, EigenSystem, KlModel};
use crate::criteria::{evaluate_criterion, modified_norm_sq, rkhs_norm_sq, Criterion, MahalanobisMetric};
use crate::error::{DepthError, Result};
use crate::grid::{FunctionalSample, GridFunction};
use crate::linalg::{jacobi_eigen, SquareMatrix};
use crate::par;
use crate::rng::{standard_normal, stream};
use crate::special::{chi2_quantile, chi2_sf, std_normal_quantile, std_normal_sf};
use crate::warping::{fisher_rao_distance, warp_l2_distance, KarcherMean, WarpingFunction};

/// Default Monte Carlo reference size.
pub const DEFAULT_N: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    MonteCarlo,
    SampleAverage,
    ClosedForm,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::MonteCarlo => "monte-carlo",
            Estimator::SampleAverage => "sample-average",
            Estimator::ClosedForm => "closed-form",
        })
    }
}

/// How synthetic reference coefficients are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Sampler {
    /// Resample each coordinate independently, with replacement, from the fitted coefficients.
    #[default]
    Bootstrap,
    /// Independent `N(0, lambda_p)` coordinates.
    Gaussian,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::Bootstrap => "bootstrap",
            Sampler::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthResult {
    pub value: f64,
    pub criterion: String,
    pub estimator: Estimator,
    /// Reference size; 0 for closed forms.
    pub n: usize,
    pub seed: u64,
    /// `zeta(f_obs, f_c)`, or the RKHS norm for closed forms.
    pub criterion_value: f64,
}

/// `N` rows whose `p`-th entries are drawn uniformly with replacement from
/// column `p` of `coeffs`. Row `j` uses stream `(seed, j)`.
pub fn bootstrap_reference(coeffs: &CoefficientMatrix, n: usize, seed: u64) -> Result<CoefficientMatrix> {
    if coeffs.rows() == 0 || coeffs.cols() == 0 {
        return Err(DepthError::EmptyReference);
    }
    if n == 0 {
        return Err(DepthError::InvalidArgument("reference size must be at least 1".into()));
    }
    let (rows, cols) = (coeffs.rows(), coeffs.cols());
    let data = par::map_range(n, |j| {
        let mut rng = stream(seed, j as u64);
        (0..cols).map(|p| coeffs.get(rng.gen_range(0..rows), p)).collect::<Vec<_>>()
    });
    CoefficientMatrix::new(n, cols, data.concat())
}

/// `N` rows of independent `N(0, lambda_p)` coordinates. Row `j` uses stream `(seed, j)`.
pub fn gaussian_reference(eigenvalues: &[f64], n: usize, seed: u64) -> Result<CoefficientMatrix> {
    if eigenvalues.is_empty() {
        return Err(DepthError::EmptyReference);
    }
    if n == 0 {
        return Err(DepthError::InvalidArgument("reference size must be at least 1".into()));
    }
    let sd: Vec<f64> = eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let data = par::map_range(n, |j| {
        let mut rng = stream(seed, j as u64);
        sd.iter().map(|s| s * standard_normal(&mut rng)).collect::<Vec<_>>()
    });
    CoefficientMatrix::new(n, eigenvalues.len(), data.concat())
}

/// Reference coefficients for `model` under `sampler`.
pub fn draw_reference(model: &KlModel, sampler: Sampler, n: usize, seed: u64) -> Result<CoefficientMatrix> {
    match sampler {
        Sampler::Bootstrap => bootstrap_reference(model.coefficients(), n, seed),
        Sampler::Gaussian => gaussian_reference(model.system().eigenvalues(), n, seed),
    }
}

/// Sorted criterion values of a reference set; answers depth queries by
/// counting reference values `>=` the query's.
#[derive(Debug, Clone, PartialEq)]
pub struct McReference {
    sorted: Vec<f64>,
    criterion: String,
    estimator: Estimator,
    seed: u64,
}

impl McReference {
    fn from_values(mut values: Vec<f64>, criterion: String, estimator: Estimator, seed: u64) -> Result<Self> {
        if values.is_empty() {
            return Err(DepthError::EmptyReference);
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted: values, criterion, estimator, seed })
    }

    /// Sample-average reference from precomputed criterion values.
    pub fn from_criterion_values(values: Vec<f64>, criterion: &Criterion) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(DepthError::NonFinite { index });
        }
        Self::from_values(values, criterion.tag(), Estimator::SampleAverage, 0)
    }

    /// Reference made of explicit functions, e.g. the fitting sample.
    pub fn from_functions(functions: &[GridFunction], f_c: &GridFunction, criterion: &Criterion) -> Result<Self> {
        let values = par::try_map_range(functions.len(), |j| evaluate_criterion(criterion, &functions[j], f_c))?;
        Self::from_values(values, criterion.tag(), Estimator::SampleAverage, 0)
    }

    /// Reference made of synthetic coefficient rows `g_j = mean + sum_p g_jp phi_p`.
    ///
    /// RKHS-type criteria centred at the model mean are evaluated directly on
    /// the coefficients; everything else goes through the synthesized functions.
    pub fn from_coefficients(
        model: &KlModel,
        rows: &CoefficientMatrix,
        f_c: &GridFunction,
        criterion: &Criterion,
        seed: u64,
    ) -> Result<Self> {
        if rows.cols() != model.system().count() {
            return Err(DepthError::LengthMismatch { expected: model.system().count(), got: rows.cols() });
        }
        let direct = f_c == model.mean()
            && match criterion {
                Criterion::ModifiedRkhs { system, .. } | Criterion::Rkhs { system } => **system == *model.system(),
                _ => false,
            };
        let values = if direct {
            par::try_map_range(rows.rows(), |j| {
                let c = rows.row(j);
                match criterion {
                    Criterion::ModifiedRkhs { system, weights } => Ok(modified_norm_sq(c, system, weights)?.sqrt()),
                    Criterion::Rkhs { system } => Ok(rkhs_norm_sq(c, system)?.sqrt()),
                    _ => unreachable!(),
                }
            })?
        } else {
            par::try_map_range(rows.rows(), |j| evaluate_criterion(criterion, &model.synthesize(rows.row(j)), f_c))?
        };
        Self::from_values(values, criterion.tag(), Estimator::MonteCarlo, seed)
    }

    /// Draws `n` reference rows from `model` and evaluates them.
    pub fn sample(
        model: &KlModel,
        sampler: Sampler,
        n: usize,
        seed: u64,
        f_c: &GridFunction,
        criterion: &Criterion,
    ) -> Result<Self> {
        let rows = draw_reference(model, sampler, n, seed)?;
        Self::from_coefficients(model, &rows, f_c, criterion, seed)
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Reference criterion values in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of reference values `>= zeta`.
    pub fn depth_of_value(&self, zeta: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v < zeta);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    pub fn depth(&self, f_obs: &GridFunction, f_c: &GridFunction, criterion: &Criterion) -> Result<DepthResult> {
        if criterion.tag() != self.criterion {
            return Err(DepthError::InvalidArgument(format!(
                "reference was built for {}, not {}",
                self.criterion,
                criterion.tag()
            )));
        }
        let zeta = evaluate_criterion(criterion, f_obs, f_c)?;
        Ok(DepthResult {
            value: self.depth_of_value(zeta),
            criterion: self.criterion.clone(),
            estimator: self.estimator,
            n: self.len(),
            seed: self.seed,
            criterion_value: zeta,
        })
    }
}

/// Monte Carlo depth of `f_obs` against a prepared reference.
pub fn mc_depth(
    f_obs: &GridFunction,
    f_c: &GridFunction,
    criterion: &Criterion,
    reference: &McReference,
) -> Result<DepthResult> {
    reference.depth(f_obs, f_c, criterion)
}

/// Depth of `f_obs` estimated by the fraction of the sample at least as far from `f_c`.
pub fn sample_average_depth(
    f_obs: &GridFunction,
    f_c: &GridFunction,
    criterion: &Criterion,
    sample: &FunctionalSample,
) -> Result<DepthResult> {
    McReference::from_functions(sample.rows(), f_c, criterion)?.depth(f_obs, f_c, criterion)
}

fn rkhs_norm_of(f_obs: &GridFunction, f_c: &GridFunction, system: &EigenSystem) -> Result<f64> {
    let coeffs = kl_project(&f_obs.sub(f_c)?, system)?;
    Ok(rkhs_norm_sq(&coeffs, system)?.sqrt())
}

fn closed_form(value: f64, criterion: &str, criterion_value: f64) -> DepthResult {
    DepthResult {
        value,
        criterion: criterion.into(),
        estimator: Estimator::ClosedForm,
        n: 0,
        seed: 0,
        criterion_value,
    }
}

/// Gaussian halfspace depth `1 - Phi(||f_obs - f_c||_H)`.
pub fn halfspace_depth_closed_form(f_obs: &GridFunction, f_c: &GridFunction, system: &EigenSystem) -> Result<DepthResult> {
    let norm = rkhs_norm_of(f_obs, f_c, system)?;
    Ok(closed_form(std_normal_sf(norm), "rkhs", norm))
}

/// Gaussian norm depth `1 - F_chi2(C)(||f_obs - f_c||_H^2)` for a `C`-dimensional model.
pub fn chisq_depth(f_obs: &GridFunction, f_c: &GridFunction, system: &EigenSystem) -> Result<DepthResult> {
    let norm = rkhs_norm_of(f_obs, f_c, system)?;
    Ok(closed_form(chi2_sf(norm * norm, system.count() as f64), "rkhs", norm))
}

/// `1 - F_chi2(d)(zeta^2)` for a `d`-variate normal and Mahalanobis distance `zeta`.
pub fn mahalanobis_depth_closed_form(x: &[f64], mean: &[f64], metric: &MahalanobisMetric) -> Result<DepthResult> {
    let sq = metric.norm_sq(x, mean)?;
    Ok(closed_form(chi2_sf(sq, metric.dim() as f64), "mahalanobis", sq.sqrt()))
}

/// Whether the observation lies in the `alpha` central region.
pub fn central_region_membership(depth: &DepthResult, alpha: f64) -> bool {
    depth.value >= alpha
}

/// RKHS norm on the boundary of the halfspace `alpha` region, for `alpha` in `(0, 1/2]`.
pub fn halfspace_level(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(DepthError::InvalidArgument(format!("halfspace level needs alpha in (0, 0.5], got {alpha}")));
    }
    Ok(std_normal_quantile(1.0 - alpha).max(0.0))
}

/// Norm `zeta*` with `1 - F_chi2(k)(zeta*^2) = alpha`, for `alpha` in `(0, 1]`.
pub fn chisq_level(alpha: f64, k: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) || k == 0 {
        return Err(DepthError::InvalidArgument(format!("chi-square level needs alpha in (0, 1] and k >= 1, got {alpha}, {k}")));
    }
    Ok(chi2_quantile(1.0 - alpha, k as f64).sqrt())
}

/// Sample-average depths of every observation aligned by `km`, using the
/// warpings onto the Karcher template as the criterion arguments.
pub fn karcher_warping_depths(km: &KarcherMean, criterion: &Criterion) -> Result<Vec<DepthResult>> {
    let distance: fn(&WarpingFunction) -> f64 = match criterion {
        Criterion::WarpL2 => warp_l2_distance,
        Criterion::WarpFisherRao => fisher_rao_distance,
        _ => return Err(DepthError::InvalidArgument(format!("{} is not a warping criterion", criterion.tag()))),
    };
    let values: Vec<f64> = km.warpings.iter().map(distance).collect();
    let reference = McReference::from_criterion_values(values.clone(), criterion)?;
    Ok(values
        .into_iter()
        .map(|zeta| DepthResult {
            value: reference.depth_of_value(zeta),
            criterion: reference.criterion.clone(),
            estimator: Estimator::SampleAverage,
            n: reference.len(),
            seed: 0,
            criterion_value: zeta,
        })
        .collect())
}

/// How depths are computed for a batch of observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    MonteCarlo { sampler: Sampler, n: usize, seed: u64 },
    SampleAverage,
    Halfspace,
    ChiSquare,
}

/// Depths of `queries` under `model`. Closed forms ignore `criterion` and
/// use the RKHS norm of the model.
pub fn score(
    model: &KlModel,
    sample: &FunctionalSample,
    queries: &[GridFunction],
    f_c: &GridFunction,
    criterion: &Criterion,
    method: Method,
) -> Result<Vec<DepthResult>> {
    match method {
        Method::MonteCarlo { sampler, n, seed } => {
            let reference = McReference::sample(model, sampler, n, seed, f_c, criterion)?;
            queries.iter().map(|q| reference.depth(q, f_c, criterion)).collect()
        }
        Method::SampleAverage => {
            let reference = McReference::from_functions(sample.rows(), f_c, criterion)?;
            queries.iter().map(|q| reference.depth(q, f_c, criterion)).collect()
        }
        Method::Halfspace => {
            par::try_map_range(queries.len(), |i| halfspace_depth_closed_form(&queries[i], f_c, model.system()))
        }
        Method::ChiSquare => par::try_map_range(queries.len(), |i| chisq_depth(&queries[i], f_c, model.system())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierReport {
    pub depths: Vec<DepthResult>,
    /// Indices with depth `< alpha`, ascending.
    pub flagged: Vec<usize>,
}

/// Scores every observation against the model fitted on the full sample and
/// flags those with depth below `alpha`.
pub fn detect_outliers(
    model: &KlModel,
    sample: &FunctionalSample,
    f_c: &GridFunction,
    criterion: &Criterion,
    method: Method,
    alpha: f64,
) -> Result<OutlierReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(DepthError::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let depths = score(model, sample, sample.rows(), f_c, criterion, method)?;
    let flagged = depths.iter().enumerate().filter(|(_, d)| d.value < alpha).map(|(i, _)| i).collect();
    Ok(OutlierReport { depths, flagged })
}

/// Mean, covariance and principal axes of a point cloud in `R^d`.
#[derive(Debug, Clone)]
pub struct MultivariateModel {
    mean: Vec<f64>,
    covariance: SquareMatrix,
    metric: MahalanobisMetric,
    /// Principal variances (descending) and axes.
    variances: Vec<f64>,
    axes: Vec<Vec<f64>>,
    /// Principal coordinates of the centred sample.
    scores: CoefficientMatrix,
}

impl MultivariateModel {
    pub fn fit(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(DepthError::InsufficientSample { required: 2, got: n });
        }
        let d = points[0].len();
        if d == 0 {
            return Err(DepthError::InvalidArgument("points must have at least one coordinate".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(DepthError::LengthMismatch { expected: d, got: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(DepthError::NonFinite { index: i });
            }
        }
        let mean: Vec<f64> = (0..d).map(|k| points.iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let mut cov = SquareMatrix::zeros(d);
        for a in 0..d {
            for b in a..d {
                let s = points.iter().map(|p| (p[a] - mean[a]) * (p[b] - mean[b])).sum::<f64>() / (n - 1) as f64;
                cov.set(a, b, s);
                cov.set(b, a, s);
            }
        }
        Self::from_moments(mean, cov, points)
    }

    fn from_moments(mean: Vec<f64>, covariance: SquareMatrix, points: &[Vec<f64>]) -> Result<Self> {
        let metric = MahalanobisMetric::new(&covariance)?;
        let eig = jacobi_eigen(&covariance)?;
        let scores: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                eig.vectors
                    .iter()
                    .map(|v| v.iter().zip(p).zip(&mean).map(|((a, x), m)| a * (x - m)).sum())
                    .collect()
            })
            .collect();
        Ok(Self {
            mean,
            covariance,
            metric,
            variances: eig.values,
            axes: eig.vectors,
            scores: CoefficientMatrix::from_rows(scores)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &SquareMatrix {
        &self.covariance
    }

    pub fn metric(&self) -> &MahalanobisMetric {
        &self.metric
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Mahalanobis distance to the fitted mean.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.metric.norm_sq(x, &self.mean)?.sqrt())
    }

    /// Synthetic points `mean + sum_k s_k axis_k` from principal coordinates.
    pub fn reference_points(&self, sampler: Sampler, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let rows = match sampler {
            Sampler::Bootstrap => bootstrap_reference(&self.scores, n, seed)?,
            Sampler::Gaussian => gaussian_reference(&self.variances, n, seed)?,
        };
        Ok(rows
            .iter_rows()
            .map(|s| {
                let mut x = self.mean.clone();
                for (sk, axis) in s.iter().zip(&self.axes) {
                    for (xi, a) in x.iter_mut().zip(axis) {
                        *xi += sk * a;
                    }
                }
                x
            })
            .collect())
    }

    fn reference_of(&self, points: &[Vec<f64>], estimator: Estimator, seed: u64) -> Result<McReference> {
        let values = par::try_map_range(points.len(), |j| self.distance(&points[j]))?;
        McReference::from_values(values, "mahalanobis".into(), estimator, seed)
    }

    /// Monte Carlo reference of Mahalanobis distances.
    pub fn mc_reference(&self, sampler: Sampler, n: usize, seed: u64) -> Result<McReference> {
        self.reference_of(&self.reference_points(sampler, n, seed)?, Estimator::MonteCarlo, seed)
    }

    /// Reference made of explicit points, e.g. the fitting sample.
    pub fn sample_reference(&self, points: &[Vec<f64>]) -> Result<McReference> {
        self.reference_of(points, Estimator::SampleAverage, 0)
    }

    /// Depth of `x` against a reference built by this model.
    pub fn depth(&self, x: &[f64], reference: &McReference) -> Result<DepthResult> {
        let zeta = self.distance(x)?;
        Ok(DepthResult {
            value: reference.depth_of_value(zeta),
            criterion: reference.criterion.clone(),
            estimator: reference.estimator,
            n: reference.len(),
            seed: reference.seed,
            criterion_value: zeta,
        })
    }

    /// `1 - F_chi2(d)(zeta^2)`.
    pub fn closed_form_depth(&self, x: &[f64]) -> Result<DepthResult> {
        mahalanobis_depth_closed_form(x, &self.mean, &self.metric)
    }
}
