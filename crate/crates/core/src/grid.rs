//! Uniform grids, sampled functions and the calculus built on them.
//!
//! Every integral in the crate goes through [`integrate`], which is the
//! composite trapezoid rule on the grid. Derivatives use second-order finite
//! differences with one-sided stencils at both ends.

use crate::error::{DepthError, Result};

/// Uniform grid `t_k = t0 + k * dt`, `k = 0..m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t0: f64,
    t1: f64,
    m: usize,
}

impl Grid {
    pub fn new(t0: f64, t1: f64, m: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(DepthError::InvalidGrid("endpoints must be finite".into()));
        }
        if t1 <= t0 {
            return Err(DepthError::InvalidGrid(format!("t1 ({t1}) must exceed t0 ({t0})")));
        }
        if m < 3 {
            return Err(DepthError::InvalidGrid(format!("need at least 3 points, got {m}")));
        }
        Ok(Self { t0, t1, m })
    }

    /// `m` points on `[0, 1]`.
    pub fn unit(m: usize) -> Result<Self> {
        Self::new(0.0, 1.0, m)
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t1
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.t1 - self.t0) / (self.m - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k == self.m - 1 {
            self.t1
        } else {
            self.t0 + k as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|k| self.point(k)).collect()
    }

    /// Same number of points, relabelled onto `[0, 1]`.
    pub fn to_unit(&self) -> Grid {
        Grid { t0: 0.0, t1: 1.0, m: self.m }
    }

    /// Trapezoid weights; `integrate(f) == sum_k w_k f_k`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.spacing();
        let mut w = vec![dt; self.m];
        w[0] = 0.5 * dt;
        w[self.m - 1] = 0.5 * dt;
        w
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(DepthError::GridMismatch)
        }
    }
}

/// A real function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(DepthError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(DepthError::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.point(k))).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map. The result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &GridFunction, b: f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.lincomb(1.0, other, -1.0)
    }

    /// In-place `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &GridFunction) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        Ok(())
    }

    /// Same values, grid relabelled onto `[0, 1]`.
    pub fn on_unit_interval(&self) -> Self {
        Self { grid: self.grid.to_unit(), values: self.values.clone() }
    }

    /// Same values on another grid with the same number of points.
    pub fn with_grid(&self, grid: Grid) -> Result<Self> {
        Self::new(grid, self.values.clone())
    }

    /// Piecewise-linear interpolation; clamps outside the grid.
    pub fn interpolate(&self, t: f64) -> f64 {
        let g = &self.grid;
        let m = g.len();
        let x = (t - g.start()) / g.spacing();
        if x <= 0.0 {
            return self.values[0];
        }
        if x >= (m - 1) as f64 {
            return self.values[m - 1];
        }
        let k = (x.floor() as usize).min(m - 2);
        let frac = x - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// `n` functions observed on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    grid: Grid,
    rows: Vec<GridFunction>,
}

impl FunctionalSample {
    pub fn new(rows: Vec<GridFunction>) -> Result<Self> {
        let first = rows.first().ok_or(DepthError::InsufficientSample { required: 1, got: 0 })?;
        let grid = *first.grid();
        for row in &rows {
            grid.ensure_same(row.grid())?;
        }
        Ok(Self { grid, rows })
    }

    pub fn from_rows(grid: Grid, rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows.into_iter().map(|r| GridFunction::new(grid, r)).collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rows(&self) -> &[GridFunction] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &GridFunction {
        &self.rows[i]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Cross-sectional mean, accumulated in index order.
    pub fn mean(&self) -> GridFunction {
        let m = self.grid.len();
        let mut acc = vec![0.0; m];
        for row in &self.rows {
            for (a, v) in acc.iter_mut().zip(row.values()) {
                *a += v;
            }
        }
        let n = self.rows.len() as f64;
        GridFunction { grid: self.grid, values: acc.into_iter().map(|a| a / n).collect() }
    }

    /// Applies `f` to every row, keeping the grid.
    pub fn map_rows(&self, f: impl Fn(&GridFunction) -> GridFunction) -> Result<Self> {
        Self::new(self.rows.iter().map(f).collect())
    }
}

/// Composite trapezoid rule over the grid.
pub fn integrate(f: &GridFunction) -> f64 {
    let v = f.values();
    let m = v.len();
    let interior: f64 = v[1..m - 1].iter().sum();
    f.grid().spacing() * (interior + 0.5 * (v[0] + v[m - 1]))
}

/// `(integral |f|^p)^(1/p)` for `p >= 1`.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(DepthError::InvalidArgument(format!("Lp norm needs finite p >= 1, got {p}")));
    }
    let powered = if p == 2.0 { f.map(|v| v * v) } else { f.map(|v| v.abs().powf(p)) };
    let s = integrate(&powered).max(0.0);
    Ok(if p == 2.0 { s.sqrt() } else { s.powf(1.0 / p) })
}

/// L2 inner product `integral f g`.
pub fn l2_inner(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.grid().ensure_same(g.grid())?;
    let v = f.values();
    let w = g.values();
    let m = v.len();
    let interior: f64 = (1..m - 1).map(|k| v[k] * w[k]).sum();
    Ok(f.grid().spacing() * (interior + 0.5 * (v[0] * w[0] + v[m - 1] * w[m - 1])))
}

/// Finite-difference derivative of order 1 or 2.
///
/// Central differences in the interior, second-order one-sided stencils at
/// the two boundary points. Order 2 uses the direct second-difference stencil.
pub fn derivative(f: &GridFunction, order: u32) -> Result<GridFunction> {
    let m = f.len();
    let h = f.grid().spacing();
    let v = f.values();
    let out = match order {
        1 => {
            let mut d = vec![0.0; m];
            d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
            d[m - 1] = (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) / (2.0 * h);
            for k in 1..m - 1 {
                d[k] = (v[k + 1] - v[k - 1]) / (2.0 * h);
            }
            d
        }
        2 => {
            if m < 5 {
                return Err(DepthError::InvalidArgument(format!(
                    "second derivative needs at least 5 grid points, got {m}"
                )));
            }
            let h2 = h * h;
            let mut d = vec![0.0; m];
            d[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
            d[m - 1] = (2.0 * v[m - 1] - 5.0 * v[m - 2] + 4.0 * v[m - 3] - v[m - 4]) / h2;
            for k in 1..m - 1 {
                d[k] = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / h2;
            }
            d
        }
        r => {
            return Err(DepthError::InvalidArgument(format!(
                "derivative order must be 1 or 2, got {r}"
            )))
        }
    };
    GridFunction::new(*f.grid(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn unit(m: usize) -> Grid {
        Grid::unit(m).unwrap()
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(Grid::new(1.0, 0.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 2).is_err());
        assert!(Grid::new(0.0, f64::NAN, 10).is_err());
        let g = Grid::new(-3.0, 3.0, 7).unwrap();
        assert_eq!(g.points(), vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn grid_function_rejects_nan_and_wrong_length() {
        let g = unit(5);
        assert_eq!(
            GridFunction::new(g, vec![0.0; 4]),
            Err(DepthError::LengthMismatch { expected: 5, got: 4 })
        );
        assert_eq!(
            GridFunction::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]),
            Err(DepthError::NonFinite { index: 2 })
        );
    }

    #[test]
    fn integrate_constant_linear_and_sine() {
        let g = unit(101);
        assert_eq!(integrate(&GridFunction::constant(g, 1.0)), 1.0);
        assert!((integrate(&GridFunction::from_fn(g, |t| t)) - 0.5).abs() < 1e-15);
        let s = GridFunction::from_fn(unit(201), |t| (PI * t).sin());
        assert!((integrate(&s) - 2.0 / PI).abs() < 1e-4);
    }

    #[test]
    fn lp_norm_cases() {
        let g = unit(201);
        assert_eq!(lp_norm(&GridFunction::zeros(g), 2.0).unwrap(), 0.0);
        let f = GridFunction::from_fn(g, |t| SQRT_2 * (PI * t).sin());
        assert!((lp_norm(&f, 2.0).unwrap() - 1.0).abs() < 1e-4);
        for p in [1.0, 1.5, 2.0, 3.0, 7.0] {
            let c = GridFunction::constant(g, -2.5);
            assert!((lp_norm(&c, p).unwrap() - 2.5).abs() < 1e-12, "p = {p}");
        }
        assert!(lp_norm(&f, 0.5).is_err());
        assert!(lp_norm(&f, f64::NAN).is_err());
    }

    #[test]
    fn inner_product_cases() {
        let g = unit(201);
        let f1 = GridFunction::from_fn(g, |t| SQRT_2 * (PI * t).sin());
        let f2 = GridFunction::from_fn(g, |t| SQRT_2 * (2.0 * PI * t).sin());
        assert!((l2_inner(&f1, &f1).unwrap() - 1.0).abs() < 1e-4);
        assert!(l2_inner(&f1, &f2).unwrap().abs() < 1e-4);
        assert_eq!(l2_inner(&GridFunction::zeros(g), &f2).unwrap(), 0.0);
        let other = GridFunction::zeros(unit(101));
        assert_eq!(l2_inner(&f1, &other), Err(DepthError::GridMismatch));
    }

    #[test]
    fn derivative_cases() {
        let g = unit(101);
        let d = derivative(&GridFunction::from_fn(g, |t| t), 1).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
        let d2 = derivative(&GridFunction::from_fn(g, |t| t * t), 2).unwrap();
        assert!(d2.values().iter().all(|v| (v - 2.0).abs() < 1e-6));
        let dc = derivative(&GridFunction::constant(g, 4.0), 1).unwrap();
        assert!(dc.values().iter().all(|v| v.abs() < 1e-12));
        assert!(derivative(&dc, 3).is_err());
        // second-order stencils are exact for quadratics at the ends too
        let dq = derivative(&GridFunction::from_fn(g, |t| t * t), 1).unwrap();
        assert!((dq.values()[0]).abs() < 1e-10);
        assert!((dq.values()[100] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn interpolation_hits_nodes() {
        let g = Grid::new(-3.0, 3.0, 61).unwrap();
        let f = GridFunction::from_fn(g, |t| t * t);
        assert!((f.interpolate(1.0) - 1.0).abs() < 1e-12);
        assert!((f.interpolate(-3.5) - 9.0).abs() < 1e-12);
        assert!((f.interpolate(0.05) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn sample_mean_and_grid_check() {
        let g = unit(11);
        let s = FunctionalSample::new(vec![
            GridFunction::constant(g, 1.0),
            GridFunction::constant(g, 3.0),
        ])
        .unwrap();
        assert!(s.mean().values().iter().all(|&v| v == 2.0));
        let bad = FunctionalSample::new(vec![GridFunction::zeros(g), GridFunction::zeros(unit(12))]);
        assert_eq!(bad, Err(DepthError::GridMismatch));
    }
}
