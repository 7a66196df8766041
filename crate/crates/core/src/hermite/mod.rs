//! Probabilists' Hermite polynomials, Gauss–Hermite quadrature against the
//! standard Gaussian weight, Hermite expansions of observables and their ranks.

mod observable;
mod rule;

pub use observable::Observable;
pub use rule::GaussHermite;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Largest degree the three-term recurrence is trusted for.
pub const MAX_DEGREE: usize = 200;
/// Default threshold separating zero from non-zero coefficients.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Default number of Gauss–Hermite nodes.
pub const DEFAULT_NODES: usize = 128;
const MAX_NODES: usize = 2048;

/// `H_p(x)` by `H_{p+1} = x H_p - p H_{p-1}`.
pub fn hermite_eval(p: usize, x: f64) -> Result<f64> {
    if p > MAX_DEGREE {
        return Err(Error::Range(format!(
            "Hermite degree {p} exceeds the recurrence limit {MAX_DEGREE}"
        )));
    }
    let (mut h0, mut h1) = (1.0, x);
    if p == 0 {
        return Ok(1.0);
    }
    for k in 1..p {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    Ok(h1)
}

/// `H_q(x)/√q!` for `q = 0..=max`, stable for large `q`.
pub fn hermite_normalized(x: f64, max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(1.0);
    if max >= 1 {
        out.push(x);
    }
    for q in 1..max {
        let next = (x * out[q] - (q as f64).sqrt() * out[q - 1]) / ((q + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// `√q!` for `q ≤ 170`, via logs beyond.
pub fn sqrt_factorial(q: usize) -> f64 {
    (0.5 * libm::lgamma(q as f64 + 1.0)).exp()
}

/// A Hermite rank: a finite order or "none found up to the truncation order".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rank {
    Finite(usize),
    Infinite,
}

impl Rank {
    pub fn finite(self) -> Option<usize> {
        match self {
            Rank::Finite(q) => Some(q),
            Rank::Infinite => None,
        }
    }
}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        let key = |r: &Rank| r.finite().unwrap_or(usize::MAX);
        Some(key(self).cmp(&key(other)))
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Finite(q) => write!(f, "{q}"),
            Rank::Infinite => write!(f, "inf"),
        }
    }
}

/// Truncated Hermite expansion `φ ≈ Σ_{q ≤ Q} a_q H_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteExpansion {
    /// `a_0 ..= a_Q`.
    pub coeffs: Vec<f64>,
    /// `a_q √q!`; squares give the per-chaos variance weights without
    /// overflowing `q!`.
    pub scaled: Vec<f64>,
    pub rank: Rank,
    pub second_rank: Rank,
    pub rank_tol: f64,
    /// `Σ_{q=1..Q} a_q² q!`.
    pub tail_mass: f64,
    /// `E[φ(Z)²]` when known.
    pub second_moment: Option<f64>,
    /// Set when the ranks were not found below `Q`.
    pub truncation_limited: bool,
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl HermiteExpansion {
    /// Builds an expansion from scaled coefficients `a_q √q!`.
    pub fn from_scaled(scaled: Vec<f64>, second_moment: Option<f64>, rank_tol: f64) -> Self {
        let coeffs = scaled
            .iter()
            .enumerate()
            .map(|(q, b)| b / sqrt_factorial(q))
            .collect();
        let tail_mass = scaled.iter().skip(1).map(|b| b * b).sum();
        let mut e = HermiteExpansion {
            coeffs,
            scaled,
            rank: Rank::Infinite,
            second_rank: Rank::Infinite,
            rank_tol,
            tail_mass,
            second_moment,
            truncation_limited: false,
            nodes: None,
            warning: None,
        };
        let (r, r2, limited) = ranks(&e.coeffs, rank_tol);
        e.rank = r;
        e.second_rank = r2;
        e.truncation_limited = limited;
        e
    }

    /// Builds an expansion from plain coefficients `a_q`.
    pub fn from_coeffs(coeffs: &[f64], second_moment: Option<f64>, rank_tol: f64) -> Self {
        let scaled = coeffs.iter().enumerate().map(|(q, a)| a * sqrt_factorial(q)).collect();
        let mut e = Self::from_scaled(scaled, second_moment, rank_tol);
        e.coeffs = coeffs.to_vec();
        e
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, q: usize) -> f64 {
        self.coeffs.get(q).copied().unwrap_or(0.0)
    }

    /// `a_q² q!`, the weight of chaos `q` in variance formulas.
    pub fn chaos_weight(&self, q: usize) -> f64 {
        self.scaled.get(q).map_or(0.0, |b| b * b)
    }

    /// `E[φ²] - a_0² - Σ_{q≤Q} a_q² q!` when the second moment is known.
    pub fn parseval_gap(&self) -> Option<f64> {
        self.second_moment.map(|m2| m2 - self.coeffs[0].powi(2) - self.tail_mass)
    }

    /// Mass of chaoses above `n`: exact up to `Q`, plus the Parseval gap.
    pub fn mass_above(&self, n: usize) -> f64 {
        let listed: f64 = (n + 1..=self.order()).map(|q| self.chaos_weight(q)).sum();
        listed + self.parseval_gap().unwrap_or(0.0).max(0.0)
    }

    /// Coefficient-wise `α·self + β·other` (orders padded with zeros).
    pub fn combine(&self, alpha: f64, other: &HermiteExpansion, beta: f64) -> HermiteExpansion {
        let n = self.coeffs.len().max(other.coeffs.len());
        let scaled = (0..n)
            .map(|q| {
                alpha * self.scaled.get(q).copied().unwrap_or(0.0)
                    + beta * other.scaled.get(q).copied().unwrap_or(0.0)
            })
            .collect();
        HermiteExpansion::from_scaled(scaled, None, self.rank_tol)
    }
}

fn ranks(coeffs: &[f64], tol: f64) -> (Rank, Rank, bool) {
    let mut nonzero = coeffs.iter().enumerate().skip(1).filter(|(_, a)| a.abs() > tol);
    let r = nonzero.next().map_or(Rank::Infinite, |(q, _)| Rank::Finite(q));
    let r2 = nonzero.next().map_or(Rank::Infinite, |(q, _)| Rank::Finite(q));
    (r, r2, r2 == Rank::Infinite)
}

/// Hermite rank `R` and second rank `R'` at threshold `rank_tol`; the flag is
/// set when either was not found below the truncation order.
pub fn hermite_rank(expansion: &HermiteExpansion, rank_tol: f64) -> (Rank, Rank, bool) {
    ranks(&expansion.coeffs, rank_tol)
}

/// Expands `φ` up to order `max_order` by Gauss–Hermite quadrature, doubling
/// the node count (from `nodes`) until the coefficients move by less than
/// `1e-10`.
pub fn hermite_expand<F>(phi: F, max_order: usize, nodes: usize) -> Result<HermiteExpansion>
where
    F: Fn(f64) -> f64,
{
    if max_order == 0 || max_order > MAX_DEGREE {
        return Err(Error::Range(format!(
            "truncation order must lie in 1..={MAX_DEGREE}, got {max_order}"
        )));
    }
    let mut n = nodes.max(max_order + 1);
    let mut prev = project(&phi, max_order, n)?;
    let mut warning = None;
    loop {
        if n * 2 > MAX_NODES {
            warning = Some(format!(
                "Hermite coefficients not stable to 1e-10 at {n} Gauss-Hermite nodes"
            ));
            break;
        }
        let next = project(&phi, max_order, n * 2)?;
        let change = prev
            .0
            .iter()
            .zip(&next.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        n *= 2;
        prev = next;
        if change < 1e-10 {
            break;
        }
    }
    let (scaled, m2) = prev;
    let mut e = HermiteExpansion::from_scaled(scaled, Some(m2), DEFAULT_RANK_TOL);
    e.nodes = Some(n);
    e.warning = warning;
    Ok(e)
}

/// Scaled coefficients `a_q √q! = E[φ(Z) H_q(Z)/√q!]` and `E[φ(Z)²]` at `n` nodes.
fn project<F: Fn(f64) -> f64>(phi: &F, max_order: usize, n: usize) -> Result<(Vec<f64>, f64)> {
    let rule = GaussHermite::cached(n);
    let mut scaled = vec![0.0; max_order + 1];
    let mut m2 = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        if w == 0.0 {
            continue;
        }
        let v = phi(x);
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("observable is not finite at node x={x}")));
        }
        m2 += w * v * v;
        for (s, h) in scaled.iter_mut().zip(hermite_normalized(x, max_order)) {
            *s += w * v * h;
        }
    }
    Ok((scaled, m2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(hermite_eval(0, 3.7).unwrap(), 1.0);
        assert!((hermite_eval(2, 0.5).unwrap() + 0.75).abs() < 1e-15);
        assert!((hermite_eval(4, 1.0).unwrap() + 2.0).abs() < 1e-15);
        assert!(hermite_eval(201, 1.0).is_err());
        assert!(hermite_eval(200, 1.0).is_ok());
    }

    #[test]
    fn normalized_matches_plain() {
        for &x in &[-2.5, 0.0, 0.7, 3.0] {
            let h = hermite_normalized(x, 30);
            for (q, hq) in h.iter().enumerate() {
                let plain = hermite_eval(q, x).unwrap() / sqrt_factorial(q);
                assert!((hq - plain).abs() < 1e-10 * plain.abs().max(1.0));
            }
        }
    }

    #[test]
    fn expand_h3_and_square() {
        let e = hermite_expand(|x| hermite_eval(3, x).unwrap(), 6, DEFAULT_NODES).unwrap();
        for q in 0..=6 {
            let expect = if q == 3 { 1.0 } else { 0.0 };
            assert!((e.coeffs[q] - expect).abs() < 1e-10, "q={q}: {}", e.coeffs[q]);
        }
        assert_eq!((e.rank, e.second_rank), (Rank::Finite(3), Rank::Infinite));
        let e = hermite_expand(|x| x * x, 4, DEFAULT_NODES).unwrap();
        let expect = [1.0, 0.0, 1.0, 0.0, 0.0];
        for q in 0..=4 {
            assert!((e.coeffs[q] - expect[q]).abs() < 1e-10);
        }
        assert!(e.warning.is_none());
    }

    #[test]
    fn rank_examples() {
        let h2 = Observable::Hermite(2).expansion(10).unwrap();
        let (r, r2, limited) = hermite_rank(&h2, DEFAULT_RANK_TOL);
        assert_eq!((r, r2), (Rank::Finite(2), Rank::Infinite));
        assert!(limited);
        let ind0 = Observable::Indicator { u: 0.0 }.expansion(10).unwrap();
        assert_eq!(hermite_rank(&ind0, DEFAULT_RANK_TOL).0, Rank::Finite(1));
        assert_eq!(hermite_rank(&ind0, DEFAULT_RANK_TOL).1, Rank::Finite(3));
        let ind1 = Observable::Indicator { u: 1.0 }.expansion(10).unwrap();
        assert_eq!(
            (ind1.rank, ind1.second_rank),
            (Rank::Finite(1), Rank::Finite(2))
        );
        assert!(Rank::Finite(3) < Rank::Infinite);
    }

    #[test]
    fn nonfinite_observable_is_an_error() {
        let r = hermite_expand(|x| if x > 3.0 { f64::INFINITY } else { 0.0 }, 4, 32);
        assert!(matches!(r, Err(Error::Evaluation(_))));
        assert!(hermite_expand(|x| x, 0, 32).is_err());
    }
}
