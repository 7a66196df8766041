//! Stationary isotropic covariance models and their decay/regularity records.

use super::bessel::{bessel_j_unchecked, bessel_k_scaled, normalized_series};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use libm::{lgamma as ln_gamma, tgamma as gamma};
use std::fmt;

/// Anything that provides a radial covariance `c(|z|)` in dimension `d`.
pub trait RadialCovariance: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, r: f64) -> f64;
}

/// The family a model belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// `b_d(r) = 2^{d/2-1} Γ(d/2) J_{d/2-1}(r) r^{1-d/2}`.
    Berry,
    /// `exp(-r^α)`, `α ∈ (0, 2]`.
    Exponential { alpha: f64 },
    /// `2^{1-μ}/Γ(μ) r^μ K_μ(r)`.
    WhittleMatern { mu: f64 },
    /// `(1 + r^γ)^{-β/γ}`: long memory when `β` is small.
    Cauchy { beta: f64, gamma: f64 },
}

/// Polynomial decay record: `|c(r)| ≤ C1 r^{-δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCondition {
    pub delta: f64,
    pub c1: Option<f64>,
}

/// Local regularity record: `c(r) ≤ 1 - C2 r^α` for `r < ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityCondition {
    pub alpha: f64,
    pub c2: Option<f64>,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cond5: Option<DecayCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cond6: Option<RegularityCondition>,
}

impl fmt::Display for CovarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ModelKind::Berry => write!(f, "berry(d={})", self.d),
            ModelKind::Exponential { alpha } => write!(f, "exponential(alpha={alpha},d={})", self.d),
            ModelKind::WhittleMatern { mu } => write!(f, "matern(mu={mu},d={})", self.d),
            ModelKind::Cauchy { beta, gamma } => {
                write!(f, "cauchy(beta={beta},gamma={gamma},d={})", self.d)
            }
        }
    }
}

/// Large-lag oscillation data of Berry models:
/// `b_d(r) ≈ amplitude · r^{-decay} · cos(r - phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub amplitude: f64,
    pub decay: f64,
    pub phase: f64,
}

impl CovarianceModel {
    pub fn new(kind: ModelKind, d: usize) -> Result<Self> {
        let m = CovarianceModel { kind, d, cond5: None, cond6: None };
        m.validate()?;
        Ok(m)
    }

    pub fn berry(d: usize) -> Result<Self> {
        Self::new(ModelKind::Berry, d)
    }

    pub fn exponential(alpha: f64, d: usize) -> Result<Self> {
        Self::new(ModelKind::Exponential { alpha }, d)
    }

    pub fn whittle_matern(mu: f64, d: usize) -> Result<Self> {
        Self::new(ModelKind::WhittleMatern { mu }, d)
    }

    pub fn cauchy(beta: f64, gamma: f64, d: usize) -> Result<Self> {
        Self::new(ModelKind::Cauchy { beta, gamma }, d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("dimension d must be >= 1".into()));
        }
        let bad = |msg: String| Err(Error::Config(msg));
        match self.kind {
            ModelKind::Berry if self.d < 2 => bad(format!("Berry model needs d >= 2, got {}", self.d)),
            ModelKind::Exponential { alpha } if !(alpha > 0.0 && alpha <= 2.0) => {
                bad(format!("exponential shape alpha must lie in (0,2], got {alpha}"))
            }
            ModelKind::WhittleMatern { mu } if !(mu > 0.0 && mu.is_finite()) => {
                bad(format!("Whittle-Matern smoothness mu must be > 0, got {mu}"))
            }
            ModelKind::Cauchy { beta, gamma }
                if !(beta > 0.0 && beta.is_finite() && gamma > 0.0 && gamma <= 2.0) =>
            {
                bad(format!("Cauchy model needs beta > 0 and gamma in (0,2], got beta={beta}, gamma={gamma}"))
            }
            _ => {
                if let Some(c5) = self.cond5 {
                    if !(c5.delta > 0.0) {
                        return bad(format!("decay exponent delta must be > 0, got {}", c5.delta));
                    }
                }
                if let Some(c6) = self.cond6 {
                    if !(c6.alpha > 0.0 && c6.eps > 0.0) {
                        return bad("regularity record needs alpha > 0 and eps > 0".into());
                    }
                }
                Ok(())
            }
        }
    }

    /// Bessel order `d/2 - 1` of a Berry model.
    pub fn berry_order(&self) -> f64 {
        self.d as f64 / 2.0 - 1.0
    }

    /// `c(r)`. The caller guarantees `r ≥ 0`.
    pub fn value(&self, r: f64) -> f64 {
        match self.kind {
            ModelKind::Berry => berry_cov(self.d, r),
            ModelKind::Exponential { alpha } => {
                if alpha == 1.0 {
                    (-r).exp()
                } else {
                    (-r.powf(alpha)).exp()
                }
            }
            ModelKind::WhittleMatern { mu } => matern_cov(mu, r),
            ModelKind::Cauchy { beta, gamma } => (1.0 + r.powf(gamma)).powf(-beta / gamma),
        }
    }

    /// The lag past which Berry covariances oscillate like their envelope.
    pub fn envelope(&self) -> Option<Envelope> {
        match self.kind {
            ModelKind::Berry => {
                let nu = self.berry_order();
                let amplitude = (nu * std::f64::consts::LN_2 + ln_gamma(nu + 1.0)).exp()
                    * (2.0 / std::f64::consts::PI).sqrt();
                Some(Envelope {
                    amplitude,
                    decay: (self.d as f64 - 1.0) / 2.0,
                    phase: (0.5 * nu + 0.25) * std::f64::consts::PI,
                })
            }
            _ => None,
        }
    }

    /// Decay and regularity exponents that hold for the family.
    pub fn natural_conditions(&self) -> (DecayCondition, RegularityCondition) {
        let d = self.d as f64;
        let (delta, alpha, eps) = match self.kind {
            ModelKind::Berry => ((d - 1.0) / 2.0, 2.0, 0.5),
            // exponentially decaying families satisfy any polynomial decay; record d + 1
            ModelKind::Exponential { alpha } => (d + 1.0, alpha, 0.5),
            ModelKind::WhittleMatern { mu } => (d + 1.0, (2.0 * mu).min(2.0), 0.5),
            ModelKind::Cauchy { beta, gamma } => (beta, gamma, 0.5),
        };
        (
            DecayCondition { delta, c1: None },
            RegularityCondition { alpha, c2: None, eps },
        )
    }

    /// Fills missing condition records with the family defaults.
    pub fn with_natural_conditions(mut self) -> Self {
        let (c5, c6) = self.natural_conditions();
        self.cond5.get_or_insert(c5);
        self.cond6.get_or_insert(c6);
        self
    }

    /// Decay exponent `δ` from the record (or the family default).
    pub fn decay_exponent(&self) -> f64 {
        self.cond5.unwrap_or(self.natural_conditions().0).delta
    }

    /// Local exponent `α` from the record (or the family default).
    pub fn local_exponent(&self) -> f64 {
        self.cond6.unwrap_or(self.natural_conditions().1).alpha
    }

    /// True when the covariance decays faster than any power.
    pub fn is_short_range(&self) -> bool {
        matches!(self.kind, ModelKind::Exponential { .. } | ModelKind::WhittleMatern { .. })
    }

    /// Scale at which the covariance varies: 2π for unit-wavenumber Berry
    /// models, 1 for the others.
    pub fn wavelength(&self) -> f64 {
        match self.kind {
            ModelKind::Berry => 2.0 * std::f64::consts::PI,
            _ => 1.0,
        }
    }

    pub fn tag(&self) -> String {
        self.to_string()
    }
}

impl RadialCovariance for CovarianceModel {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, r: f64) -> f64 {
        self.value(r)
    }
}

fn berry_cov(d: usize, r: f64) -> f64 {
    let nu = d as f64 / 2.0 - 1.0;
    if r == 0.0 {
        return 1.0;
    }
    if r <= 2.0 {
        return normalized_series(nu, r);
    }
    match d {
        2 => bessel_j_unchecked(0.0, r),
        3 => r.sin() / r,
        _ => {
            let log_pref = nu * (2.0 / r).ln() + ln_gamma(nu + 1.0);
            log_pref.exp() * bessel_j_unchecked(nu, r)
        }
    }
}

fn matern_cov(mu: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    if mu == 0.5 {
        return (-r).exp();
    }
    let log_pref = (1.0 - mu) * std::f64::consts::LN_2 - ln_gamma(mu) + mu * r.ln() - r;
    let v = log_pref.exp() * bessel_k_scaled(mu, r);
    v.min(1.0)
}

/// `c(r)` with argument checks.
pub fn cov_eval(model: &CovarianceModel, r: f64) -> Result<f64> {
    model.validate()?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("lag must be finite and >= 0, got {r}")));
    }
    Ok(model.value(r))
}

/// Outcome of a grid check of the decay and regularity conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub model: String,
    pub delta: f64,
    pub c1: f64,
    pub decay_pass: bool,
    pub alpha: f64,
    pub c2: f64,
    pub eps: f64,
    pub regularity_pass: bool,
    /// Upper constant `C3` with `1 - c(r) ≤ C3 r^α` near 0; `None` when the
    /// ratio blows up as `r → 0` (α larger than the true local exponent).
    pub c3: Option<f64>,
    pub unit_variance: bool,
    pub bounded_by_one: bool,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

/// Fits `C1`, `C2` on a grid when not supplied and verifies the inequalities
/// on a wider/finer grid.
pub fn check_conditions(model: &CovarianceModel) -> Result<ConditionReport> {
    model.validate()?;
    let (nat5, nat6) = model.natural_conditions();
    let c5 = model.cond5.unwrap_or(nat5);
    let c6 = model.cond6.unwrap_or(nat6);

    // decay: fit on [0.01, 100], verify on [0.01, 1000]
    let fitted_c1 = log_grid(1e-2, 100.0, 4000)
        .map(|r| model.value(r).abs() * r.powf(c5.delta))
        .fold(0.0f64, f64::max);
    let c1 = c5.c1.unwrap_or(fitted_c1 * (1.0 + 1e-9));
    let decay_pass = log_grid(1e-2, 1000.0, 40_000)
        .all(|r| model.value(r).abs() * r.powf(c5.delta) <= c1 * 1.05);

    // regularity near 0
    let ratio = |r: f64| (1.0 - model.value(r)) / r.powf(c6.alpha);
    let fitted_c2 = log_grid(1e-3, c6.eps, 2000).map(ratio).fold(f64::INFINITY, f64::min);
    let c2 = c6.c2.unwrap_or(fitted_c2 * (1.0 - 1e-9));
    let regularity_pass = c2 > 0.0
        && log_grid(1e-3, c6.eps * (1.0 - 1e-12), 20_000)
            .all(|r| model.value(r) <= 1.0 - c2 * r.powf(c6.alpha) * (1.0 - 1e-6) + 1e-15);
    let sup_near = log_grid(1e-4, c6.eps, 2000).map(ratio).fold(0.0f64, f64::max);
    let sup_far = log_grid(1e-2, c6.eps, 2000).map(ratio).fold(0.0f64, f64::max);
    let c3 = (sup_near <= 2.0 * sup_far).then_some(sup_near);

    let unit_variance = model.value(0.0) == 1.0;
    let bounded_by_one = (0..=10_000).all(|i| model.value(i as f64 * 0.01).abs() <= 1.0 + 1e-15);
    Ok(ConditionReport {
        model: model.tag(),
        delta: c5.delta,
        c1,
        decay_pass,
        alpha: c6.alpha,
        c2,
        eps: c6.eps,
        regularity_pass,
        c3,
        unit_variance,
        bounded_by_one,
    })
}

/// Constant `2^{d/2-1} Γ(d/2)` of the Berry covariance.
pub fn berry_constant(d: usize) -> f64 {
    let nu = d as f64 / 2.0 - 1.0;
    2f64.powf(nu) * gamma(nu + 1.0)
}
