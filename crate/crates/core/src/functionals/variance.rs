use super::{DomainSpec, Shape};
use crate::covmoments::{breakpoints, cov_moment, covariogram, Radius};
use crate::error::{Error, Result};
use crate::hermite::{HermiteExpansion, MAX_DEGREE};
use crate::quad::{integrate, QuadOptions};
use crate::specialfn::{sphere_surface, CovarianceModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const TAIL_REL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceTerm {
    pub q: usize,
    /// `a_q² q! ∫∫_{(tD)²} C^q(x - y) dx dy`.
    pub value: f64,
    pub err: f64,
}

/// `σ²_{t,N}` with its per-chaos terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceBreakdown {
    pub domain: DomainSpec,
    pub n: usize,
    pub total: f64,
    pub err: f64,
    pub terms: Vec<VarianceTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl VarianceBreakdown {
    pub fn term(&self, q: usize) -> Option<&VarianceTerm> {
        self.terms.iter().find(|t| t.q == q)
    }
}

/// Lattice spacing `min(0.25, λ/8)`, `λ` the model's oscillation or
/// correlation length.
pub fn default_spacing(model: &CovarianceModel) -> f64 {
    (model.wavelength() / 8.0).min(0.25)
}

fn opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-13, rel_tol: 1e-10, max_intervals: 50_000 }
}

/// `∫∫_{(tD)²} C^q(x - y) dx dy`.
pub fn double_integral(model: &CovarianceModel, q: usize, domain: &DomainSpec) -> Result<(f64, f64)> {
    let d = domain.d;
    let t = domain.t;
    let qi = q as i32;
    let res = match (domain.shape, d) {
        (Shape::Ball, _) => {
            let f = |r: f64| model.value(r).powi(qi) * covariogram(d, t, t, r) * r.powi(d as i32 - 1);
            let i = integrate(f, &breakpoints(model, q, 2.0 * t), opts());
            (i, sphere_surface(d))
        }
        (Shape::Box, 1) => {
            let f = |r: f64| model.value(r).powi(qi) * (t - r);
            (integrate(f, &breakpoints(model, q, t), opts()), 2.0)
        }
        (Shape::Box, 2) => {
            let pts = breakpoints(model, q, t);
            let inner_opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-12, max_intervals: 5000 };
            let outer = |x: f64| {
                let g = |y: f64| model.value((x * x + y * y).sqrt()).powi(qi) * (t - y);
                integrate(g, &pts, inner_opts).value * (t - x)
            };
            (integrate(outer, &pts, opts()), 4.0)
        }
        (Shape::Box, _) => {
            return Err(Error::Config(format!("box-domain variances are implemented for d <= 2, got d = {d}")));
        }
    };
    let (i, factor) = res;
    if !i.converged {
        return Err(Error::Accuracy(format!(
            "variance quadrature for chaos q = {q} did not converge (err {:.3e})",
            i.err
        )));
    }
    Ok((factor * i.value, factor * i.err))
}

/// `σ²_{t,N} = Σ_{q=R..N} a_q² q! ∫∫_{(tD)²} C^q`.
pub fn exact_variance(
    model: &CovarianceModel,
    expansion: &HermiteExpansion,
    domain: &DomainSpec,
    n: usize,
) -> Result<VarianceBreakdown> {
    model.validate()?;
    domain.validate()?;
    if model.d != domain.d {
        return Err(Error::Config(format!("model dimension {} != domain dimension {}", model.d, domain.d)));
    }
    let rank = expansion
        .rank
        .finite()
        .ok_or_else(|| Error::Config("observable has no finite Hermite rank below its truncation".into()))?;
    if n < rank {
        return Err(Error::Config(format!("truncation N = {n} is below the Hermite rank R = {rank}")));
    }
    if n > expansion.order() {
        return Err(Error::Config(format!(
            "truncation N = {n} exceeds the expansion order {}",
            expansion.order()
        )));
    }
    let terms = (rank..=n)
        .into_par_iter()
        .filter(|&q| expansion.chaos_weight(q) != 0.0)
        .map(|q| {
            let w = expansion.chaos_weight(q);
            let (v, e) = double_integral(model, q, domain)?;
            let term = VarianceTerm { q, value: w * v, err: w * e };
            if term.value < -(term.err + 1e-12 * w * domain.volume()) {
                return Err(Error::Accuracy(format!(
                    "variance term for chaos q = {q} is negative ({:e} ± {:e})",
                    term.value, term.err
                )));
            }
            Ok(term)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = terms.iter().map(|t| t.value).sum();
    let err = terms.iter().map(|t| t.err).sum();
    Ok(VarianceBreakdown { domain: *domain, n, total, err, terms, label: domain.label().map(String::from) })
}

/// Upper bound on `σ²_t - σ²_{t,N}`:
/// `(Σ_{q>N} a_q² q!) · vol(tD) · ∫_{|z| ≤ diam} |C|^{N+1}`.
pub fn tail_bound(model: &CovarianceModel, expansion: &HermiteExpansion, domain: &DomainSpec, n: usize) -> Result<f64> {
    let mass = expansion.mass_above(n);
    if mass == 0.0 {
        return Ok(0.0);
    }
    let m = cov_moment(model, n + 1, Radius::Finite(domain.diameter()), false)?;
    Ok(mass * domain.volume() * (m.value + m.err))
}

/// `σ²_{t,N*}` with the smallest `N* ≥ N_min` whose tail bound is below
/// `1e-3` of the truncated variance, capped at the expansion order.
pub fn sigma_proxy(
    model: &CovarianceModel,
    expansion: &HermiteExpansion,
    domain: &DomainSpec,
    n_min: usize,
) -> Result<(VarianceBreakdown, f64)> {
    let cap = expansion.order().min(MAX_DEGREE);
    let full = exact_variance(model, expansion, domain, cap)?;
    let mut running = 0.0;
    let mut chosen = None;
    for t in &full.terms {
        running += t.value;
        if t.q >= n_min {
            let bound = tail_bound(model, expansion, domain, t.q)?;
            if bound < TAIL_REL * running {
                chosen = Some((t.q, bound));
                break;
            }
        }
    }
    let (n_star, bound) = match chosen {
        Some(c) => c,
        None => (cap, tail_bound(model, expansion, domain, cap)?),
    };
    let terms: Vec<VarianceTerm> = full.terms.iter().copied().filter(|t| t.q <= n_star).collect();
    Ok((
        VarianceBreakdown {
            domain: *domain,
            n: n_star,
            total: terms.iter().map(|t| t.value).sum(),
            err: terms.iter().map(|t| t.err).sum(),
            terms,
            label: full.label,
        },
        bound,
    ))
}
