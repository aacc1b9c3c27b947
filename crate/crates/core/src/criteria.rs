//! Criterion functions `zeta(f, f_c)`: the distance from an observation to
//! a centre that a norm-based depth integrates over.

use std::fmt;
use std::sync::Arc;

use crate::covkernel::{kl_project, EigenSystem};
use crate::error::{DepthError, Result};
use crate::grid::{derivative, lp_norm, GridFunction};
use crate::linalg::{jacobi_eigen, Cholesky, SquareMatrix};
use crate::warping::{fisher_rao_distance, optimal_warping, warp_l2_distance};

/// Largest covariance condition number accepted by [`MahalanobisMetric`].
pub const MAX_CONDITION: f64 = 1e12;

/// Shape of the decaying weights `a_p` in the modified RKHS norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// `a_p = 1`: the plain RKHS norm, divergent on infinite-dimensional models.
    ConstantOne,
    /// `a_p = 1 / p`.
    InverseP,
    /// `a_p = 1 / (sqrt(p) log(p + 1))`.
    InverseSqrtLog,
    /// `a_p = p^-(1/2 + s)` with `s > 0`.
    Power(f64),
}

impl WeightKind {
    /// `a_p` for 1-based `p`.
    pub fn weight(&self, p: usize) -> f64 {
        let p = p as f64;
        match *self {
            WeightKind::ConstantOne => 1.0,
            WeightKind::InverseP => 1.0 / p,
            WeightKind::InverseSqrtLog => 1.0 / (p.sqrt() * (p + 1.0).ln()),
            WeightKind::Power(s) => p.powf(-(0.5 + s)),
        }
    }

    pub fn is_square_summable(&self) -> bool {
        !matches!(self, WeightKind::ConstantOne)
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightKind::ConstantOne => write!(f, "constant-one"),
            WeightKind::InverseP => write!(f, "inverse-p"),
            WeightKind::InverseSqrtLog => write!(f, "inverse-sqrt-log"),
            WeightKind::Power(s) => write!(f, "power({s})"),
        }
    }
}

/// Weights `a_1..a_C` evaluated for a system of length `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    kind: WeightKind,
    values: Vec<f64>,
}

impl WeightSequence {
    pub fn new(kind: WeightKind, len: usize) -> Result<Self> {
        if let WeightKind::Power(s) = kind {
            if !(s > 0.0) {
                return Err(DepthError::InvalidArgument(format!("power weights need s > 0, got {s}")));
            }
        }
        Ok(Self { kind, values: (1..=len).map(|p| kind.weight(p)).collect() })
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_coeffs(coeffs: &[f64], system: &EigenSystem) -> Result<()> {
    if coeffs.len() != system.count() {
        return Err(DepthError::LengthMismatch { expected: system.count(), got: coeffs.len() });
    }
    if let Some(index) = system.eigenvalues().iter().position(|&l| !(l > 0.0)) {
        return Err(DepthError::ZeroEigenvalue { index });
    }
    Ok(())
}

/// `sum_p c_p^2 / lambda_p * a_p^2` over the retained components.
pub fn modified_norm_sq(coeffs: &[f64], system: &EigenSystem, weights: &WeightSequence) -> Result<f64> {
    check_coeffs(coeffs, system)?;
    if weights.len() < coeffs.len() {
        return Err(DepthError::LengthMismatch { expected: coeffs.len(), got: weights.len() });
    }
    Ok(coeffs
        .iter()
        .zip(system.eigenvalues())
        .zip(weights.values())
        .map(|((c, l), a)| c * c / l * a * a)
        .sum())
}

/// Squared RKHS norm `sum_p c_p^2 / lambda_p` of a finite expansion.
pub fn rkhs_norm_sq(coeffs: &[f64], system: &EigenSystem) -> Result<f64> {
    check_coeffs(coeffs, system)?;
    Ok(coeffs.iter().zip(system.eigenvalues()).map(|(c, l)| c * c / l).sum())
}

/// Mahalanobis metric `x -> x^T S^-1 x` backed by a Cholesky factor of `S`.
#[derive(Debug, Clone)]
pub struct MahalanobisMetric {
    factor: Cholesky,
    condition: f64,
}

impl MahalanobisMetric {
    pub fn new(cov: &SquareMatrix) -> Result<Self> {
        if !cov.is_symmetric(1e-12) {
            return Err(DepthError::InvalidArgument("covariance must be symmetric".into()));
        }
        let eig = jacobi_eigen(cov)?;
        let max = eig.values.first().copied().unwrap_or(0.0);
        let min = eig.values.last().copied().unwrap_or(0.0);
        if !(min > 0.0) {
            return Err(DepthError::NotPositiveDefinite);
        }
        let condition = max / min;
        if condition > MAX_CONDITION {
            return Err(DepthError::IllConditioned(condition));
        }
        Ok(Self { factor: Cholesky::factor(cov)?, condition })
    }

    pub fn dim(&self) -> usize {
        self.factor.lower().dim()
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `(x - mean)^T S^-1 (x - mean)` via one triangular solve.
    pub fn norm_sq(&self, x: &[f64], mean: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d || mean.len() != d {
            return Err(DepthError::LengthMismatch { expected: d, got: x.len().min(mean.len()) });
        }
        let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
        Ok(self.factor.forward_solve(&diff).iter().map(|y| y * y).sum())
    }
}

/// `(x - mean)^T cov^-1 (x - mean)`.
pub fn mahalanobis_norm_sq(x: &[f64], mean: &[f64], cov: &SquareMatrix) -> Result<f64> {
    MahalanobisMetric::new(cov)?.norm_sq(x, mean)
}

/// A fitted criterion function.
#[derive(Debug, Clone)]
pub enum Criterion {
    /// `||f - f_c||_p`.
    Lp { p: f64 },
    /// `||D^r (f - f_c)||_p`.
    DerivativeLp { order: u32, p: f64 },
    /// Square root of the modified RKHS norm of `f - f_c`.
    ModifiedRkhs { system: Arc<EigenSystem>, weights: WeightSequence },
    /// RKHS norm of `f - f_c` under a finite-dimensional system.
    Rkhs { system: Arc<EigenSystem> },
    /// `||gamma - gamma_id||_2` for the warping aligning `f` onto `f_c`.
    WarpL2,
    /// Fisher–Rao distance of the aligning warping to the identity.
    WarpFisherRao,
    /// Mahalanobis distance on the grid values.
    Mahalanobis(Arc<MahalanobisMetric>),
}

impl Criterion {
    /// Modified-RKHS criterion; constant-one weights are refused unless the
    /// caller vouches that the model is finite dimensional.
    pub fn modified_rkhs(system: Arc<EigenSystem>, kind: WeightKind, allow_divergent: bool) -> Result<Self> {
        if !kind.is_square_summable() && !allow_divergent {
            return Err(DepthError::DivergentWeights);
        }
        let weights = WeightSequence::new(kind, system.count())?;
        Ok(Criterion::ModifiedRkhs { system, weights })
    }

    pub fn lp(p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(DepthError::InvalidArgument(format!("Lp norm needs p >= 1, got {p}")));
        }
        Ok(Criterion::Lp { p })
    }

    pub fn derivative_lp(order: u32, p: f64) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(DepthError::InvalidArgument(format!("derivative order must be 1 or 2, got {order}")));
        }
        if !(p >= 1.0) {
            return Err(DepthError::InvalidArgument(format!("Lp norm needs p >= 1, got {p}")));
        }
        Ok(Criterion::DerivativeLp { order, p })
    }

    /// Short tag used in reports, e.g. `lp(2)` or `modified-rkhs(inverse-p)`.
    pub fn tag(&self) -> String {
        match self {
            Criterion::Lp { p } => format!("lp({p})"),
            Criterion::DerivativeLp { order, p } => format!("derivative-lp({order},{p})"),
            Criterion::ModifiedRkhs { weights, .. } => format!("modified-rkhs({})", weights.kind()),
            Criterion::Rkhs { .. } => "rkhs".into(),
            Criterion::WarpL2 => "warp-l2".into(),
            Criterion::WarpFisherRao => "warp-fisher-rao".into(),
            Criterion::Mahalanobis(_) => "mahalanobis".into(),
        }
    }

    /// Whether the criterion is a norm of `f - f_c` (as opposed to a warping distance).
    pub fn is_norm(&self) -> bool {
        !matches!(self, Criterion::WarpL2 | Criterion::WarpFisherRao)
    }
}

/// `zeta(f, f_c)`; nonnegative, and zero when `f == f_c` for every norm kind.
pub fn evaluate_criterion(criterion: &Criterion, f: &GridFunction, f_c: &GridFunction) -> Result<f64> {
    match criterion {
        Criterion::Lp { p } => lp_norm(&f.sub(f_c)?, *p),
        Criterion::DerivativeLp { order, p } => lp_norm(&derivative(&f.sub(f_c)?, *order)?, *p),
        Criterion::ModifiedRkhs { system, weights } => {
            let coeffs = kl_project(&f.sub(f_c)?, system)?;
            Ok(modified_norm_sq(&coeffs, system, weights)?.sqrt())
        }
        Criterion::Rkhs { system } => {
            let coeffs = kl_project(&f.sub(f_c)?, system)?;
            Ok(rkhs_norm_sq(&coeffs, system)?.sqrt())
        }
        Criterion::WarpL2 => Ok(warp_l2_distance(&optimal_warping(f, f_c)?)),
        Criterion::WarpFisherRao => Ok(fisher_rao_distance(&optimal_warping(f, f_c)?)),
        Criterion::Mahalanobis(metric) => Ok(metric.norm_sq(f.values(), f_c.values())?.sqrt()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::{PI, SQRT_2};

    fn bb_system(m: usize, p: usize) -> EigenSystem {
        let g = Grid::unit(m).unwrap();
        let lambdas = (1..=p).map(|k| 1.0 / ((k * k) as f64 * PI * PI)).collect();
        let phis = (1..=p).map(|k| GridFunction::from_fn(g, |t| SQRT_2 * (k as f64 * PI * t).sin())).collect();
        EigenSystem::from_parts(lambdas, phis).unwrap()
    }

    #[test]
    fn weight_shapes() {
        let w = WeightSequence::new(WeightKind::InverseP, 4).unwrap();
        assert_eq!(w.values(), &[1.0, 0.5, 1.0 / 3.0, 0.25]);
        let w = WeightSequence::new(WeightKind::InverseSqrtLog, 2).unwrap();
        assert!((w.values()[0] - 1.0 / 2.0_f64.ln()).abs() < 1e-15);
        assert!((WeightKind::Power(0.5).weight(4) - 0.25).abs() < 1e-15);
        assert!(WeightSequence::new(WeightKind::Power(0.0), 3).is_err());
    }

    #[test]
    fn modified_norm_examples() {
        let sys = bb_system(101, 5);
        let w = WeightSequence::new(WeightKind::InverseP, 5).unwrap();
        assert_eq!(modified_norm_sq(&[0.0; 5], &sys, &w).unwrap(), 0.0);
        let c = [sys.eigenvalues()[0].sqrt(), 0.0, 0.0, 0.0, 0.0];
        assert!((modified_norm_sq(&c, &sys, &w).unwrap() - 1.0).abs() < 1e-14);
        assert!(modified_norm_sq(&[1.0; 4], &sys, &w).is_err());
    }

    #[test]
    fn zero_eigenvalue_is_rejected() {
        let g = Grid::unit(11).unwrap();
        let sys = EigenSystem::from_parts(vec![1.0, 0.0], vec![GridFunction::zeros(g); 2]).unwrap();
        assert_eq!(rkhs_norm_sq(&[1.0, 1.0], &sys), Err(DepthError::ZeroEigenvalue { index: 1 }));
    }

    #[test]
    fn rkhs_examples() {
        let sys = bb_system(101, 2);
        assert_eq!(rkhs_norm_sq(&[0.0, 0.0], &sys).unwrap(), 0.0);
        let c: Vec<f64> = sys.eigenvalues().iter().map(|l| l.sqrt()).collect();
        assert!((rkhs_norm_sq(&c, &sys).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rkhs_is_derivative_energy() {
        let sys = bb_system(401, 50);
        let f = GridFunction::from_fn(*sys.grid(), |t| SQRT_2 * (3.0 * PI * t).sin());
        let c = kl_project(&f, &sys).unwrap();
        let got = rkhs_norm_sq(&c, &sys).unwrap();
        let want = 9.0 * PI * PI;
        assert!((got - want).abs() / want < 0.02, "{got} vs {want}");
    }

    #[test]
    fn mahalanobis_examples() {
        let id = SquareMatrix::identity(2);
        assert_eq!(mahalanobis_norm_sq(&[1.0, 2.0], &[1.0, 2.0], &id).unwrap(), 0.0);
        assert!((mahalanobis_norm_sq(&[3.0, 4.0], &[0.0, 0.0], &id).unwrap() - 25.0).abs() < 1e-14);
        let s = SquareMatrix::from_rows(&[vec![1.0, 1.0 / 3.0], vec![1.0 / 3.0, 0.25]]).unwrap();
        assert!((mahalanobis_norm_sq(&[1.0, 0.0], &[0.0, 0.0], &s).unwrap() - 1.8).abs() < 1e-12);
    }

    #[test]
    fn mahalanobis_rejects_bad_covariances() {
        let singular = SquareMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(MahalanobisMetric::new(&singular).is_err());
        let indefinite = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(MahalanobisMetric::new(&indefinite).is_err());
        let stiff = SquareMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1e-13]]).unwrap();
        assert!(matches!(MahalanobisMetric::new(&stiff), Err(DepthError::IllConditioned(_))));
    }

    #[test]
    fn criterion_examples() {
        let g = Grid::unit(201).unwrap();
        let sys = Arc::new(bb_system(201, 8));
        let f = GridFunction::from_fn(g, |t| t.sin() + t * t);
        let all = [
            Criterion::lp(2.0).unwrap(),
            Criterion::derivative_lp(1, 2.0).unwrap(),
            Criterion::derivative_lp(2, 2.0).unwrap(),
            Criterion::modified_rkhs(sys.clone(), WeightKind::InverseP, false).unwrap(),
            Criterion::Rkhs { system: sys.clone() },
            Criterion::WarpL2,
            Criterion::WarpFisherRao,
        ];
        for c in &all {
            assert!(evaluate_criterion(c, &f, &f).unwrap().abs() < 1e-7, "{}", c.tag());
        }
        let mode = GridFunction::from_fn(g, |t| SQRT_2 * (PI * t).sin());
        let zero = GridFunction::zeros(g);
        let v = evaluate_criterion(&all[0], &mode, &zero).unwrap();
        assert!((v - 1.0).abs() < 1e-4);
        let shift = GridFunction::constant(g, 5.0);
        assert!(evaluate_criterion(&all[1], &shift, &zero).unwrap() < 1e-10);
    }

    #[test]
    fn constant_weights_need_opt_in() {
        let sys = Arc::new(bb_system(51, 3));
        assert!(matches!(
            Criterion::modified_rkhs(sys.clone(), WeightKind::ConstantOne, false),
            Err(DepthError::DivergentWeights)
        ));
        assert!(Criterion::modified_rkhs(sys, WeightKind::ConstantOne, true).is_ok());
    }
}
