//! Covariance kernels and their Karhunen–Loève eigensystems.
//!
//! A kernel sampled on an `m`-point grid is treated as an integral operator
//! discretized with the same trapezoid rule used everywhere else, so the
//! eigenvalues are comparable to the analytic operator spectrum regardless of
//! grid resolution.

use crate::error::{DepthError, Result};
use crate::grid::{l2_inner, FunctionalSample, Grid, GridFunction};
use crate::linalg::{jacobi_eigen, SquareMatrix};
use crate::par;

/// Covariance kernel sampled on a grid, `values[i][j] = K(t_i, t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    grid: Grid,
    values: SquareMatrix,
}

impl KernelMatrix {
    pub fn new(grid: Grid, values: SquareMatrix) -> Result<Self> {
        if values.dim() != grid.len() {
            return Err(DepthError::LengthMismatch { expected: grid.len(), got: values.dim() });
        }
        if let Some(index) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(DepthError::NonFinite { index });
        }
        if !values.is_symmetric(1e-12) {
            return Err(DepthError::InvalidArgument("kernel matrix is not symmetric".into()));
        }
        Ok(Self { grid, values })
    }

    /// Samples `k(s, t)` on the grid, symmetrizing by construction.
    pub fn from_fn(grid: Grid, k: impl Fn(f64, f64) -> f64) -> Self {
        let m = grid.len();
        let pts = grid.points();
        let mut values = SquareMatrix::zeros(m);
        for i in 0..m {
            for j in 0..=i {
                let v = k(pts[i], pts[j]);
                values.set(i, j, v);
                values.set(j, i, v);
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    /// Diagonal `K(t, t)` as a function.
    pub fn diagonal(&self) -> GridFunction {
        let m = self.grid.len();
        GridFunction::new(self.grid, (0..m).map(|i| self.get(i, i)).collect())
            .expect("kernel values are finite")
    }
}

/// Empirical covariance `(1/n) sum_i (f_i - fbar)(s) (f_i - fbar)(t)`.
///
/// With `center == false` the raw second moment is used instead, for models
/// declared zero-mean.
pub fn empirical_covariance(sample: &FunctionalSample, center: bool) -> Result<KernelMatrix> {
    let n = sample.len();
    if n < 2 {
        return Err(DepthError::InsufficientSample { required: 2, got: n });
    }
    let grid = *sample.grid();
    let m = grid.len();
    let mean = if center { sample.mean() } else { GridFunction::zeros(grid) };
    let residuals: Vec<Vec<f64>> = sample
        .rows()
        .iter()
        .map(|r| r.values().iter().zip(mean.values()).map(|(v, mu)| v - mu).collect())
        .collect();
    // each row of the kernel is independent; accumulate over samples in index order
    let rows: Vec<Vec<f64>> = par::map_range(m, |i| {
        let mut row = vec![0.0; i + 1];
        for r in &residuals {
            let ri = r[i];
            for (j, acc) in row.iter_mut().enumerate() {
                *acc += ri * r[j];
            }
        }
        row
    });
    let mut values = SquareMatrix::zeros(m);
    let inv_n = 1.0 / n as f64;
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            values.set(i, j, v * inv_n);
            values.set(j, i, v * inv_n);
        }
    }
    Ok(KernelMatrix { grid, values })
}

/// Eigenvalues (descending) and L2-orthonormal eigenfunctions of a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    grid: Grid,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<GridFunction>,
    delta: f64,
    raw_count: usize,
}

impl EigenSystem {
    /// Builds a system from known eigenpairs, e.g. an analytic Mercer expansion.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenfunctions: Vec<GridFunction>) -> Result<Self> {
        if eigenvalues.len() != eigenfunctions.len() {
            return Err(DepthError::LengthMismatch {
                expected: eigenvalues.len(),
                got: eigenfunctions.len(),
            });
        }
        let grid = *eigenfunctions
            .first()
            .ok_or_else(|| DepthError::InvalidArgument("empty eigensystem".into()))?
            .grid();
        for f in &eigenfunctions {
            grid.ensure_same(f.grid())?;
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) || eigenvalues.iter().any(|&l| !(l >= 0.0)) {
            return Err(DepthError::InvalidArgument(
                "eigenvalues must be nonnegative and nonincreasing".into(),
            ));
        }
        let raw_count = eigenvalues.len();
        Ok(Self { grid, eigenvalues, eigenfunctions, delta: 0.0, raw_count })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[GridFunction] {
        &self.eigenfunctions
    }

    /// Number of retained components.
    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Truncation threshold (0 when untruncated).
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of components before truncation.
    pub fn raw_count(&self) -> usize {
        self.raw_count
    }

    /// Keeps only the leading `c` components.
    pub fn leading(&self, c: usize) -> Self {
        let c = c.min(self.count());
        Self {
            grid: self.grid,
            eigenvalues: self.eigenvalues[..c].to_vec(),
            eigenfunctions: self.eigenfunctions[..c].to_vec(),
            delta: self.delta,
            raw_count: self.raw_count,
        }
    }

    /// `sum_p c_p phi_p`.
    pub fn synthesize(&self, coeffs: &[f64]) -> GridFunction {
        let mut out = GridFunction::zeros(self.grid);
        for (c, phi) in coeffs.iter().zip(&self.eigenfunctions) {
            if *c != 0.0 {
                out.axpy(*c, phi).expect("eigenfunctions share the system grid");
            }
        }
        out
    }

    /// `sum_p lambda_p phi_p(s) phi_p(t)` over the retained components.
    pub fn reconstruct_kernel(&self) -> KernelMatrix {
        let m = self.grid.len();
        let mut values = SquareMatrix::zeros(m);
        for (lam, phi) in self.eigenvalues.iter().zip(&self.eigenfunctions) {
            let v = phi.values();
            for i in 0..m {
                for j in 0..m {
                    values.set(i, j, values.get(i, j) + lam * v[i] * v[j]);
                }
            }
        }
        KernelMatrix { grid: self.grid, values }
    }
}

/// Eigendecomposition of the discretized integral operator of `kernel`.
///
/// The operator is discretized with trapezoid weights `w` and symmetrized as
/// `W^1/2 K W^1/2`, so eigenfunctions `phi = W^-1/2 v` are orthonormal under
/// [`l2_inner`]. Eigenvalues below zero are clipped; each eigenfunction has a
/// positive first nonzero component.
pub fn eigen_decompose(kernel: &KernelMatrix) -> Result<EigenSystem> {
    let grid = *kernel.grid();
    let m = grid.len();
    let sqrt_w: Vec<f64> = grid.trapezoid_weights().iter().map(|w| w.sqrt()).collect();
    let mut op = SquareMatrix::zeros(m);
    for i in 0..m {
        for j in 0..m {
            op.set(i, j, sqrt_w[i] * kernel.get(i, j) * sqrt_w[j]);
        }
    }
    let eig = jacobi_eigen(&op)?;
    let norm_floor = 1e-12;
    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenfunctions = Vec::with_capacity(m);
    for (lam, vec) in eig.values.into_iter().zip(eig.vectors) {
        let sign = vec
            .iter()
            .find(|v| v.abs() > norm_floor)
            .map(|v| v.signum())
            .unwrap_or(1.0);
        let values = vec.iter().zip(&sqrt_w).map(|(v, sw)| sign * v / sw).collect();
        eigenvalues.push(lam.max(0.0));
        eigenfunctions.push(GridFunction::new(grid, values)?);
    }
    let raw_count = eigenvalues.len();
    Ok(EigenSystem { grid, eigenvalues, eigenfunctions, delta: 0.0, raw_count })
}

/// Default truncation threshold `max(1e-8, lambda_1 / max(1, sqrt(n) log n))`.
pub fn default_delta(leading_eigenvalue: f64, n: usize) -> f64 {
    let n = n.max(2) as f64;
    (leading_eigenvalue / (n.sqrt() * n.ln()).max(1.0)).max(1e-8)
}

/// Retains the leading `min(#{p : lambda_p >= delta}, n)` eigenpairs.
pub fn truncate(system: &EigenSystem, delta: f64, n: usize) -> Result<EigenSystem> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(DepthError::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let above = system.eigenvalues.iter().take_while(|&&l| l >= delta).count();
    let c = above.min(n);
    if c == 0 {
        return Err(DepthError::DegenerateModel { delta });
    }
    Ok(EigenSystem {
        grid: system.grid,
        eigenvalues: system.eigenvalues[..c].to_vec(),
        eigenfunctions: system.eigenfunctions[..c].to_vec(),
        delta,
        raw_count: system.raw_count,
    })
}

/// Karhunen–Loève coefficients `<f, phi_p>` for every retained component.
pub fn kl_project(f: &GridFunction, system: &EigenSystem) -> Result<Vec<f64>> {
    system.grid.ensure_same(f.grid())?;
    system.eigenfunctions.iter().map(|phi| l2_inner(f, phi)).collect()
}

/// Dense `rows x cols` coefficient table, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CoefficientMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(DepthError::LengthMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            if r.len() != cols {
                return Err(DepthError::LengthMismatch { expected: cols, got: r.len() });
            }
            data.extend(r);
        }
        Ok(Self { rows: n, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, p: usize) -> f64 {
        self.data[i * self.cols + p]
    }

    pub fn column(&self, p: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, p)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Row-wise [`kl_project`].
pub fn project_sample(sample: &FunctionalSample, system: &EigenSystem) -> Result<CoefficientMatrix> {
    system.grid.ensure_same(sample.grid())?;
    let rows = par::try_map_range(sample.len(), |i| kl_project(sample.row(i), system))?;
    CoefficientMatrix::from_rows(rows).map(|mut c| {
        c.cols = system.count();
        c
    })
}

/// Options for [`KlModel::fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub center: bool,
    /// Truncation threshold; [`default_delta`] when `None`.
    pub delta: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { center: true, delta: None }
    }
}

/// Fitted Karhunen–Loève model: mean, truncated eigensystem, and the
/// coefficients of the (centered) fitting sample.
#[derive(Debug, Clone, PartialEq)]
pub struct KlModel {
    mean: GridFunction,
    centered: bool,
    system: EigenSystem,
    coefficients: CoefficientMatrix,
}

impl KlModel {
    pub fn fit(sample: &FunctionalSample, options: &FitOptions) -> Result<Self> {
        let kernel = empirical_covariance(sample, options.center)?;
        let raw = eigen_decompose(&kernel)?;
        let lambda1 = raw.eigenvalues.first().copied().unwrap_or(0.0);
        let delta = options.delta.unwrap_or_else(|| default_delta(lambda1, sample.len()));
        let system = truncate(&raw, delta, sample.len())?;
        let mean = if options.center { sample.mean() } else { GridFunction::zeros(*sample.grid()) };
        let centered_sample = sample.map_rows(|f| f.sub(&mean).expect("same grid"))?;
        let coefficients = project_sample(&centered_sample, &system)?;
        Ok(Self { mean, centered: options.center, system, coefficients })
    }

    /// Reassembles a model from stored parts.
    pub fn from_parts(
        mean: GridFunction,
        centered: bool,
        system: EigenSystem,
        coefficients: CoefficientMatrix,
    ) -> Result<Self> {
        system.grid.ensure_same(mean.grid())?;
        if coefficients.cols() != system.count() {
            return Err(DepthError::LengthMismatch { expected: system.count(), got: coefficients.cols() });
        }
        Ok(Self { mean, centered, system, coefficients })
    }

    pub fn mean(&self) -> &GridFunction {
        &self.mean
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    pub fn system(&self) -> &EigenSystem {
        &self.system
    }

    pub fn coefficients(&self) -> &CoefficientMatrix {
        &self.coefficients
    }

    pub fn grid(&self) -> &Grid {
        self.system.grid()
    }

    /// Coefficients of `f - mean`.
    pub fn project(&self, f: &GridFunction) -> Result<Vec<f64>> {
        kl_project(&f.sub(&self.mean)?, &self.system)
    }

    /// `mean + sum_p c_p phi_p`.
    pub fn synthesize(&self, coeffs: &[f64]) -> GridFunction {
        let mut out = self.system.synthesize(coeffs);
        out.axpy(1.0, &self.mean).expect("mean shares the system grid");
        out
    }
}
