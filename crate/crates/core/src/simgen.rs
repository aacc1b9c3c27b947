//! Generators for the simulation designs: Matérn Gaussian processes,
//! Brownian-bridge expansions with Laplace coefficients, finite Fourier
//! processes, randomly warped two-bump functions, and multivariate normals.
//!
//! Every generator is a pure function of its arguments and seed. Row `i` of
//! a generated sample draws from stream `(seed, i)`.

use std::f64::consts::{PI, SQRT_2};

use crate::covkernel::{eigen_decompose, CoefficientMatrix, EigenSystem, KernelMatrix};
use crate::error::{DepthError, Result};
use crate::grid::{integrate, FunctionalSample, Grid, GridFunction};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::par;
use crate::rng::{derive_seed, laplace, standard_normal, stream};

/// Matérn covariance for `nu` in `{1/2, 3/2}` and length-scale `l`.
pub fn matern_kernel(nu: f64, l: f64, s: f64, t: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(DepthError::InvalidArgument(format!("length-scale must be positive, got {l}")));
    }
    let r = (s - t).abs() / l;
    if nu == 0.5 {
        Ok((-r).exp())
    } else if nu == 1.5 {
        let a = 3.0_f64.sqrt() * r;
        Ok((1.0 + a) * (-a).exp())
    } else {
        Err(DepthError::InvalidArgument(format!("Matérn smoothness must be 1/2 or 3/2, got {nu}")))
    }
}

/// Matérn kernel matrix on `grid`.
pub fn matern_matrix(grid: Grid, nu: f64, l: f64) -> Result<KernelMatrix> {
    matern_kernel(nu, l, 0.0, 0.0)?;
    Ok(KernelMatrix::from_fn(grid, |s, t| matern_kernel(nu, l, s, t).expect("validated")))
}

fn gaussian_paths(system: &EigenSystem, n: usize, seed: u64) -> FunctionalSample {
    // eigenvalues at roundoff level relative to the largest carry no signal
    let floor = 1e-12 * system.eigenvalues().first().copied().unwrap_or(0.0);
    let sd: Vec<f64> = system.eigenvalues().iter().map(|&l| if l > floor { l.sqrt() } else { 0.0 }).collect();
    let rows = par::map_range(n, |i| {
        let mut rng = stream(seed, i as u64);
        let c: Vec<f64> = sd.iter().map(|s| s * standard_normal(&mut rng)).collect();
        system.synthesize(&c)
    });
    FunctionalSample::new(rows).expect("paths share the system grid")
}

/// `n` zero-mean Gaussian paths with covariance `kernel` on its grid, drawn
/// through the kernel's discrete Mercer expansion.
pub fn gp_sample(kernel: &KernelMatrix, n: usize, seed: u64) -> Result<FunctionalSample> {
    let system = eigen_decompose(kernel)?;
    let trace = integrate(&kernel.diagonal());
    let kept: f64 = system.eigenvalues().iter().sum();
    if kept - trace > 1e-8 * kept.abs().max(1.0) {
        return Err(DepthError::NotPositiveDefinite);
    }
    Ok(gaussian_paths(&system, n, seed))
}

/// `n` paths `sum_p xi_p phi_p` with `xi_p ~ N(0, lambda_p)` independent.
pub fn gp_sample_from_system(system: &EigenSystem, n: usize, seed: u64) -> FunctionalSample {
    gaussian_paths(system, n, seed)
}

/// Mercer expansion `lambda_p = 1 / (p pi)^2`, `phi_p = sqrt(2) sin(p pi t)`
/// of the Brownian-bridge kernel `min(s, t) - s t`, for `p = 1..=count`.
pub fn brownian_bridge_system(grid: Grid, count: usize) -> Result<EigenSystem> {
    let lambdas = (1..=count).map(|p| 1.0 / ((p * p) as f64 * PI * PI)).collect();
    let phis = (1..=count).map(|p| GridFunction::from_fn(grid, |t| SQRT_2 * (p as f64 * PI * t).sin())).collect();
    EigenSystem::from_parts(lambdas, phis)
}

/// Brownian-bridge paths with independent Laplace coefficients.
#[derive(Debug, Clone)]
pub struct LaplaceBridge {
    pub sample: FunctionalSample,
    /// Analytic eigensystem, truncated to the components the grid resolves.
    pub system: EigenSystem,
    /// Coefficients of every path on the returned system.
    pub coefficients: CoefficientMatrix,
}

/// `n` paths `sum_{p <= p_trunc} c_p phi_p` on the unit grid with
/// `c_p ~ Laplace(0, sqrt(lambda_p / 2))`, i.e. variance `lambda_p`.
///
/// The returned system keeps `min(p_trunc, m - 2)` components, the largest
/// set of sines that stay orthonormal under the grid quadrature.
pub fn brownian_bridge_laplace_sample(m: usize, n: usize, p_trunc: usize, seed: u64) -> Result<LaplaceBridge> {
    if p_trunc == 0 {
        return Err(DepthError::InvalidArgument("truncation must keep at least one term".into()));
    }
    let grid = Grid::unit(m)?;
    let points = grid.points();
    let basis: Vec<Vec<f64>> = (1..=p_trunc)
        .map(|p| points.iter().map(|t| SQRT_2 * (p as f64 * PI * t).sin()).collect())
        .collect();
    let scales: Vec<f64> = (1..=p_trunc).map(|p| (0.5 / ((p * p) as f64 * PI * PI)).sqrt()).collect();
    let draws = par::map_range(n, |i| {
        let mut rng = stream(seed, i as u64);
        let c: Vec<f64> = scales.iter().map(|b| laplace(&mut rng, *b)).collect();
        let mut v = vec![0.0; m];
        for (cp, phi) in c.iter().zip(&basis) {
            for (x, f) in v.iter_mut().zip(phi) {
                *x += cp * f;
            }
        }
        v[0] = 0.0;
        v[m - 1] = 0.0;
        (c, v)
    });
    let kept = p_trunc.min(m - 2);
    let system = brownian_bridge_system(grid, kept)?;
    let mut coeffs = Vec::with_capacity(n * kept);
    let mut rows = Vec::with_capacity(n);
    for (c, v) in draws {
        coeffs.extend_from_slice(&c[..kept]);
        rows.push(GridFunction::new(grid, v)?);
    }
    Ok(LaplaceBridge {
        sample: FunctionalSample::new(rows)?,
        system,
        coefficients: CoefficientMatrix::new(n, kept, coeffs)?,
    })
}

/// Orthonormal Fourier bases on `[0, 1]`, indexed from `p = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FourierBasis {
    /// `sqrt(2) sin(pi (p + 1) t)` for odd `p`, `sqrt(2) cos(pi p t)` for even `p`.
    Interleaved,
    /// `1`, then `sqrt(2) cos(pi p t)` for even `p` and `sqrt(2) sin(pi (p - 1) t)` for odd `p`.
    WithConstant,
}

impl FourierBasis {
    /// `phi_p(t)` on the unit interval.
    pub fn eval(&self, p: usize, t: f64) -> f64 {
        assert!(p >= 1, "basis index starts at 1");
        let pf = p as f64;
        match self {
            FourierBasis::Interleaved if p % 2 == 1 => SQRT_2 * (PI * (pf + 1.0) * t).sin(),
            FourierBasis::Interleaved => SQRT_2 * (PI * pf * t).cos(),
            FourierBasis::WithConstant if p == 1 => 1.0,
            FourierBasis::WithConstant if p % 2 == 0 => SQRT_2 * (PI * pf * t).cos(),
            FourierBasis::WithConstant => SQRT_2 * (PI * (pf - 1.0) * t).sin(),
        }
    }

    pub fn function(&self, grid: Grid, p: usize) -> GridFunction {
        let u = grid.to_unit();
        GridFunction::new(grid, u.points().into_iter().map(|t| self.eval(p, t)).collect()).expect("finite")
    }
}

/// Laws of the independent coefficients of a Fourier process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoeffLaw {
    /// `N(0, 1)` for every `p`.
    StdNormal,
    /// `N(0, ((P - p + 1) / P)^2)`.
    DecayingNormal,
    /// `N(0, variance)` for every `p`.
    Normal(f64),
}

impl CoeffLaw {
    pub fn variances(&self, count: usize) -> Vec<f64> {
        (1..=count)
            .map(|p| match *self {
                CoeffLaw::StdNormal => 1.0,
                CoeffLaw::DecayingNormal => ((count - p + 1) as f64 / count as f64).powi(2),
                CoeffLaw::Normal(v) => v,
            })
            .collect()
    }
}

/// Eigensystem of the Fourier process with `count` terms and law `law`.
pub fn fourier_system(grid: Grid, basis: FourierBasis, count: usize, law: CoeffLaw) -> Result<EigenSystem> {
    let phis = (1..=count).map(|p| basis.function(grid, p)).collect();
    EigenSystem::from_parts(law.variances(count), phis)
}

/// `n` paths `sum_{p <= count} a_p phi_p` with independent `a_p` drawn from `law`.
pub fn fourier_gp_sample(
    grid: Grid,
    basis: FourierBasis,
    count: usize,
    law: CoeffLaw,
    n: usize,
    seed: u64,
) -> Result<FunctionalSample> {
    if count == 0 {
        return Err(DepthError::InvalidArgument("Fourier process needs at least one term".into()));
    }
    if let CoeffLaw::Normal(v) = law {
        if !(v >= 0.0) {
            return Err(DepthError::InvalidArgument(format!("variance must be nonnegative, got {v}")));
        }
    }
    let system = fourier_system(grid, basis, count, law)?;
    Ok(gaussian_paths(&system, n, seed))
}

/// Inlier/outlier mixture of Fourier processes.
#[derive(Debug, Clone)]
pub struct LabelledSample {
    pub sample: FunctionalSample,
    /// `true` for planted outliers.
    pub outlier: Vec<bool>,
}

/// `inliers` paths with `N(0, 1)` coefficients followed by `outliers` paths
/// with `N(0, outlier_variance)` coefficients, all on the interleaved basis.
pub fn fourier_outlier_mixture(
    grid: Grid,
    count: usize,
    inliers: usize,
    outliers: usize,
    outlier_variance: f64,
    seed: u64,
) -> Result<LabelledSample> {
    let a = fourier_gp_sample(grid, FourierBasis::Interleaved, count, CoeffLaw::StdNormal, inliers, derive_seed(seed, 0))?;
    let b = fourier_gp_sample(
        grid,
        FourierBasis::Interleaved,
        count,
        CoeffLaw::Normal(outlier_variance),
        outliers,
        derive_seed(seed, 1),
    )?;
    let mut rows = a.rows().to_vec();
    rows.extend_from_slice(b.rows());
    let mut outlier = vec![false; inliers];
    outlier.extend(std::iter::repeat(true).take(outliers));
    Ok(LabelledSample { sample: FunctionalSample::new(rows)?, outlier })
}

/// The preset mixture: 45 inliers and 5 outliers of variance 3.
pub fn simulation4_preset(grid: Grid, count: usize, seed: u64) -> Result<LabelledSample> {
    fourier_outlier_mixture(grid, count, 45, 5, 3.0, seed)
}

/// `gamma(t) = 6 (e^{a (t + 3) / 6} - 1) / (e^a - 1) - 3` on `[-3, 3]`; identity at `a = 0`.
pub fn exponential_warp(a: f64, t: f64) -> f64 {
    if a == 0.0 {
        t
    } else {
        6.0 * (((a * (t + 3.0) / 6.0).exp() - 1.0) / (a.exp() - 1.0)) - 3.0
    }
}

/// Output of [`two_bump_warped_sample`].
#[derive(Debug, Clone)]
pub struct TwoBumpSample {
    /// `f_i = h_i o gamma_i` without noise.
    pub clean: FunctionalSample,
    /// As `clean`, with white noise of variance 0.01 added to the middle function.
    pub noisy: FunctionalSample,
    pub middle: usize,
    /// Warp parameters `a_i`, equally spaced in `[-1, 1]`.
    pub warp_parameters: Vec<f64>,
}

/// `n` randomly scaled two-bump functions on `[-3, 3]`, each warped by
/// [`exponential_warp`] with its own parameter.
pub fn two_bump_warped_sample(m: usize, n: usize, seed: u64) -> Result<TwoBumpSample> {
    if n < 3 || n % 2 == 0 {
        return Err(DepthError::InvalidArgument(format!("need an odd sample size of at least 3, got {n}")));
    }
    let grid = Grid::new(-3.0, 3.0, m)?;
    let middle = n / 2;
    let params: Vec<f64> = (0..n)
        .map(|i| if i == middle { 0.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 })
        .collect();
    let amp_seed = derive_seed(seed, 0);
    let rows: Vec<GridFunction> = (0..n)
        .map(|i| {
            let mut rng = stream(amp_seed, i as u64);
            let c1 = 1.0 + 0.25 * standard_normal(&mut rng);
            let c2 = 1.0 + 0.25 * standard_normal(&mut rng);
            let a = params[i];
            GridFunction::from_fn(grid, |t| {
                let s = exponential_warp(a, t);
                c1 * (-(s - 1.5).powi(2) / 2.0).exp() + c2 * (-(s + 1.5).powi(2) / 2.0).exp()
            })
        })
        .collect();
    let clean = FunctionalSample::new(rows)?;
    let mut noisy_rows = clean.rows().to_vec();
    let mut rng = stream(derive_seed(seed, 1), 0);
    let noisy: Vec<f64> = noisy_rows[middle].values().iter().map(|v| v + 0.1 * standard_normal(&mut rng)).collect();
    noisy_rows[middle] = GridFunction::new(grid, noisy)?;
    Ok(TwoBumpSample { clean, noisy: FunctionalSample::new(noisy_rows)?, middle, warp_parameters: params })
}

/// `n` draws from `N(mean, cov)` via the Cholesky factor of `cov`.
pub fn mvn_sample(mean: &[f64], cov: &SquareMatrix, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let d = mean.len();
    if cov.dim() != d {
        return Err(DepthError::LengthMismatch { expected: d, got: cov.dim() });
    }
    if !cov.is_symmetric(1e-12) {
        return Err(DepthError::InvalidArgument("covariance must be symmetric".into()));
    }
    let chol = Cholesky::factor(cov)?;
    Ok(par::map_range(n, |i| {
        let mut rng = stream(seed, i as u64);
        let z: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
        chol.lower_mul(&z).iter().zip(mean).map(|(x, m)| x + m).collect()
    }))
}

/// Paths from a Matérn-1/2 process mixed into a Matérn-3/2 sample.
#[derive(Debug, Clone)]
pub struct MaternMixture {
    pub sample: FunctionalSample,
    /// Index of the Matérn-1/2 path.
    pub interloper: usize,
}

/// One Matérn-1/2 path (index 0) followed by `n_smooth` Matérn-3/2 paths, unit length-scale.
pub fn matern_mixture(m: usize, n_smooth: usize, seed: u64) -> Result<MaternMixture> {
    let grid = Grid::unit(m)?;
    let rough = gp_sample(&matern_matrix(grid, 0.5, 1.0)?, 1, derive_seed(seed, 0))?;
    let smooth = gp_sample(&matern_matrix(grid, 1.5, 1.0)?, n_smooth, derive_seed(seed, 1))?;
    let mut rows = rough.rows().to_vec();
    rows.extend_from_slice(smooth.rows());
    Ok(MaternMixture { sample: FunctionalSample::new(rows)?, interloper: 0 })
}
