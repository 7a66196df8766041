//! Integral functionals `Y_t = ∫_{tD} φ(B(x)) dx` on a lattice, their chaos
//! components, and exact variances through the covariogram reduction.

mod lattice;
mod variance;

pub use lattice::{rect_disk_area, surface_area, Lattice};
pub use variance::{default_spacing, double_integral, exact_variance, sigma_proxy, tail_bound, VarianceBreakdown, VarianceTerm};

use crate::error::{Error, Result};
use crate::fieldgen::Realization;
use crate::hermite::{Observable, MAX_DEGREE};
use crate::quad::pairwise_sum;
use crate::specialfn::ball_volume;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Unit ball, so `tD` has radius `t`.
    Ball,
    /// Unit cube centred at 0, so `tD = [-t/2, t/2]^d`.
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub shape: Shape,
    pub t: f64,
    pub d: usize,
}

impl DomainSpec {
    pub fn ball(d: usize, t: f64) -> Result<Self> {
        let s = DomainSpec { shape: Shape::Ball, t, d };
        s.validate()?;
        Ok(s)
    }

    pub fn cube(d: usize, t: f64) -> Result<Self> {
        let s = DomainSpec { shape: Shape::Box, t, d };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("dimension must be >= 1".into()));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::Config(format!("dilation t must be positive and finite, got {}", self.t)));
        }
        Ok(())
    }

    pub fn with_t(&self, t: f64) -> Self {
        DomainSpec { t, ..*self }
    }

    pub fn volume(&self) -> f64 {
        match self.shape {
            Shape::Ball => ball_volume(self.d) * self.t.powi(self.d as i32),
            Shape::Box => self.t.powi(self.d as i32),
        }
    }

    /// Largest coordinate reached by `tD`.
    pub fn reach(&self) -> f64 {
        match self.shape {
            Shape::Ball => self.t,
            Shape::Box => 0.5 * self.t,
        }
    }

    /// Diameter of `tD`.
    pub fn diameter(&self) -> f64 {
        match self.shape {
            Shape::Ball => 2.0 * self.t,
            Shape::Box => self.t * (self.d as f64).sqrt(),
        }
    }

    /// Box domains are not centred balls, so results on them carry this label.
    pub fn label(&self) -> Option<&'static str> {
        match self.shape {
            Shape::Ball => None,
            Shape::Box => Some("outside (c3): box domain"),
        }
    }
}

/// `Y_t` on one lattice, with optional per-chaos parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalResult {
    pub value: f64,
    pub h: f64,
    pub domain: DomainSpec,
    /// `a_0 Σ_i w_i`.
    pub mean_term: Option<f64>,
    pub components: Option<BTreeMap<usize, f64>>,
}

/// Field values at the lattice points. Grid carriers must share the
/// lattice spacing and alignment and cover `tD`.
pub fn sample_on_lattice(field: &dyn Realization, lattice: &Lattice) -> Result<Vec<f64>> {
    if field.dim() != lattice.d {
        return Err(Error::Config(format!(
            "field dimension {} does not match domain dimension {}",
            field.dim(),
            lattice.d
        )));
    }
    if let Some(grid) = field.lattice() {
        let h = lattice.h;
        if (grid.spacing - h).abs() > 1e-9 * h {
            return Err(Error::Config(format!(
                "carrier grid spacing {} differs from lattice spacing {h}",
                grid.spacing
            )));
        }
        for &o in &grid.origin {
            let off = (o - 0.5 * h) / h;
            if (off - off.round()).abs() > 1e-6 {
                return Err(Error::Config("carrier grid is not aligned with the cell centres h(i+1/2)".into()));
            }
        }
        if !grid.covers(lattice.domain.reach()) {
            return Err(Error::Config(format!(
                "carrier grid smaller than tD (needs half-width {})",
                lattice.domain.reach()
            )));
        }
    }
    Ok((0..lattice.len())
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|i| field.value_at(lattice.point(i)))
        .collect())
}

/// `Σ_i w_i f(v_i)` with a fixed chunking and pairwise reduction, so the
/// result does not depend on the thread count.
pub fn weighted_sum<F: Fn(f64) -> f64 + Sync>(weights: &[f64], values: &[f64], f: F) -> f64 {
    let parts: Vec<f64> = weights
        .par_chunks(CHUNK)
        .zip(values.par_chunks(CHUNK))
        .map(|(w, v)| {
            let terms: Vec<f64> = w.iter().zip(v).map(|(a, b)| a * f(*b)).collect();
            pairwise_sum(&terms)
        })
        .collect();
    pairwise_sum(&parts)
}

/// `Σ_i w_i H_q(v_i)` for `q = 0..=n` in one pass.
pub fn chaos_sums(weights: &[f64], values: &[f64], n: usize) -> Vec<f64> {
    let parts: Vec<Vec<f64>> = weights
        .par_chunks(CHUNK)
        .zip(values.par_chunks(CHUNK))
        .map(|(w, v)| {
            let mut cols = vec![Vec::with_capacity(w.len()); n + 1];
            for (&a, &x) in w.iter().zip(v) {
                let (mut h0, mut h1) = (1.0, x);
                cols[0].push(a);
                if n >= 1 {
                    cols[1].push(a * x);
                }
                for (k, col) in cols.iter_mut().enumerate().skip(2) {
                    let h2 = x * h1 - (k - 1) as f64 * h0;
                    h0 = h1;
                    h1 = h2;
                    col.push(a * h1);
                }
            }
            cols.iter().map(|c| pairwise_sum(c)).collect()
        })
        .collect();
    (0..=n)
        .map(|q| pairwise_sum(&parts.iter().map(|p| p[q]).collect::<Vec<_>>()))
        .collect()
}

/// Midpoint sum `Σ_i w_i φ(B(x_i))` over the cells of `tD`.
pub fn integrate_functional(
    field: &dyn Realization,
    phi: &Observable,
    domain: &DomainSpec,
    h: f64,
) -> Result<FunctionalResult> {
    let lattice = Lattice::new(domain, h)?;
    let values = sample_on_lattice(field, &lattice)?;
    let value = weighted_sum(&lattice.weights, &values, |x| phi.eval(x));
    let (mean_term, components) = match phi.polynomial_degree() {
        Some(n) if n <= MAX_DEGREE => {
            let e = phi.expansion(n)?;
            let sums = chaos_sums(&lattice.weights, &values, n);
            let comps = (1..=n).filter(|&q| e.coeff(q) != 0.0).map(|q| (q, e.coeff(q) * sums[q])).collect();
            (Some(e.coeff(0) * sums[0]), Some(comps))
        }
        _ => (None, None),
    };
    Ok(FunctionalResult { value, h, domain: *domain, mean_term, components })
}

/// `a_q Σ_i w_i H_q(B(x_i))`.
pub fn chaos_component(field: &dyn Realization, q: usize, a_q: f64, domain: &DomainSpec, h: f64) -> Result<f64> {
    if q > MAX_DEGREE {
        return Err(Error::Range(format!("chaos order {q} > {MAX_DEGREE}")));
    }
    let lattice = Lattice::new(domain, h)?;
    let values = sample_on_lattice(field, &lattice)?;
    Ok(a_q * chaos_sums(&lattice.weights, &values, q)[q])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::{circulant_sample, make_planewave, ConstantField, DirectionMode, GridSpec};
    use crate::specialfn::CovarianceModel;

    fn tol(dom: &DomainSpec, h: f64) -> f64 {
        2.0 * surface_area(dom) * h
    }

    #[test]
    fn constant_observable_gives_volume() {
        for (dom, h) in [
            (DomainSpec::ball(1, 5.0).unwrap(), 0.3),
            (DomainSpec::ball(2, 4.0).unwrap(), 0.25),
            (DomainSpec::cube(2, 4.0).unwrap(), 0.3),
            (DomainSpec::ball(3, 2.0).unwrap(), 0.25),
        ] {
            let f = ConstantField { d: dom.d, value: 0.7 };
            let one = Observable::Series(vec![1.0]);
            let r = integrate_functional(&f, &one, &dom, h).unwrap();
            assert!((r.value - dom.volume()).abs() < tol(&dom, h));
            let ind = Observable::Indicator { u: -1e6 };
            let r = integrate_functional(&f, &ind, &dom, h).unwrap();
            assert!((r.value - dom.volume()).abs() < tol(&dom, h));
            let lin = integrate_functional(&f, &Observable::Hermite(1), &dom, h).unwrap();
            assert!((lin.value - 0.7 * dom.volume()).abs() < 0.7 * tol(&dom, h));
        }
    }

    #[test]
    fn chaos_component_hooks() {
        let dom = DomainSpec::ball(2, 3.0).unwrap();
        let zero = ConstantField { d: 2, value: 0.0 };
        let c2 = chaos_component(&zero, 2, 0.5, &dom, 0.2).unwrap();
        assert!((c2 + 0.5 * dom.volume()).abs() < 0.5 * tol(&dom, 0.2));
        let c = ConstantField { d: 2, value: 1.5 };
        let c1 = chaos_component(&c, 1, 2.0, &dom, 0.2).unwrap();
        assert!((c1 - 3.0 * dom.volume()).abs() < 3.0 * tol(&dom, 0.2));
    }

    #[test]
    fn components_sum_to_value() {
        let b = make_planewave(2, 64, DirectionMode::Deterministic, 4).unwrap();
        let dom = DomainSpec::ball(2, 6.0).unwrap();
        let phi = Observable::Series(vec![0.0, 0.0, 1.0, 1.0]);
        let r = integrate_functional(&b, &phi, &dom, 0.2).unwrap();
        let s: f64 = r.components.as_ref().unwrap().values().sum();
        assert!((r.value - r.mean_term.unwrap() - s).abs() < 1e-9);
    }

    #[test]
    fn grid_carrier_checks() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let g = GridSpec::centered(1, 0.125, 4.0).unwrap();
        let f = circulant_sample(&m, &g, 3).unwrap();
        let ok = integrate_functional(&f, &Observable::Hermite(2), &DomainSpec::ball(1, 4.0).unwrap(), 0.125);
        assert!(ok.is_ok());
        let big = integrate_functional(&f, &Observable::Hermite(2), &DomainSpec::ball(1, 8.0).unwrap(), 0.125);
        assert!(matches!(big, Err(Error::Config(_))));
        let other_h = integrate_functional(&f, &Observable::Hermite(2), &DomainSpec::ball(1, 2.0).unwrap(), 0.25);
        assert!(matches!(other_h, Err(Error::Config(_))));
    }
}
