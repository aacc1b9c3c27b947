//! Norm-based depth for functional data.
//!
//! The depth of an observation `f` relative to a random function `X` and a
//! centre `f_c` is `P(zeta(X, f_c) >= zeta(f, f_c))` for a criterion `zeta`,
//! typically a norm of `f - f_c`. This crate provides the grid calculus,
//! covariance eigensystems, criterion functions, and Monte Carlo, sample
//! average and closed-form depth estimators needed to compute it.

pub mod covkernel;
pub mod criteria;
pub mod depth;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod par;
pub mod rng;
pub mod simgen;
pub mod special;
pub mod warping;

pub use covkernel::{
    default_delta, eigen_decompose, empirical_covariance, kl_project, project_sample, truncate, CoefficientMatrix,
    EigenSystem, FitOptions, KernelMatrix, KlModel,
};
pub use criteria::{evaluate_criterion, Criterion, MahalanobisMetric, WeightKind, WeightSequence};
pub use error::{DepthError, Result};
pub use grid::{derivative, integrate, l2_inner, lp_norm, FunctionalSample, Grid, GridFunction};
pub use warping::{karcher_mean, optimal_warping, srvf, KarcherMean, WarpingFunction};
pub use depth::{
    bootstrap_reference, central_region_membership, chisq_depth, detect_outliers, gaussian_reference,
    halfspace_depth_closed_form, karcher_warping_depths, mc_depth, sample_average_depth, DepthResult, Estimator, McReference, Method,
    MultivariateModel, OutlierReport, Sampler,
};
