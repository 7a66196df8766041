//! Special functions and the covariance model family.

pub mod bessel;
pub mod covariance;
pub mod normal;

pub use bessel::{ball_volume, bessel_j, bessel_j_zero, bessel_k, sphere_surface};
pub use covariance::{
    check_conditions, cov_eval, ConditionReport, CovarianceModel, DecayCondition, Envelope,
    ModelKind, RadialCovariance, RegularityCondition,
};
pub use normal::{gauss_cdf, gauss_pdf, gauss_quantile, gauss_quantile_unchecked};
