//! Numerical toolkit for integral functionals of stationary Gaussian fields:
//! Hermite chaos expansions, covariance-moment asymptotics, exact variances,
//! contraction integrals, and empirical CLT / almost-sure CLT experiments.

pub mod contractions;
pub mod covmoments;
pub mod error;
pub mod fieldgen;
pub mod functionals;
pub mod hermite;
pub mod limits;
pub mod quad;
pub mod rng;
pub mod specialfn;

pub use error::{Error, Result};
