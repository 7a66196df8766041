//! Monte Carlo estimates of the contraction integrals
//! `h_t(k₁,k₂) = ∫_{(tD)⁴} C^{k₁}(x-y) C^{k₁}(z-w) C^{k₂}(x-z) C^{k₂}(y-w)`,
//! the normalized supremum `ξ_m(t)`, and the Hermite product-moment
//! inequality.

use crate::covmoments::{cov_moment, Radius};
use crate::error::{Error, Result};
use crate::functionals::{double_integral, sigma_proxy, DomainSpec, Shape};
use crate::hermite::HermiteExpansion;
use crate::rng::{stream, Purpose};
use crate::specialfn::{CovarianceModel, RadialCovariance};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNK: usize = 8192;
pub const DEFAULT_SAMPLES: usize = 2_000_000;
pub const MIN_SAMPLES: usize = 100;

/// `c ≡ 1`. Test hook.
#[derive(Debug, Clone, Copy)]
pub struct UnitCovariance {
    pub d: usize,
}

impl RadialCovariance for UnitCovariance {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, _r: f64) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    pub k1: usize,
    pub k2: usize,
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

fn uniform_point<R: Rng>(rng: &mut R, domain: &DomainSpec, out: &mut [f64]) {
    match domain.shape {
        Shape::Box => {
            for x in out.iter_mut() {
                *x = domain.t * (rng.random::<f64>() - 0.5);
            }
        }
        Shape::Ball => {
            let mut n2 = 0.0;
            for x in out.iter_mut() {
                *x = rng.sample(StandardNormal);
                n2 += *x * *x;
            }
            let radius = domain.t * rng.random::<f64>().powf(1.0 / domain.d as f64) / n2.sqrt();
            out.iter_mut().for_each(|x| *x *= radius);
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Moments { n, mean: self.mean + delta * o.n / n, m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n }
    }
}

/// Estimates `h_t(k₁,k₂)` for several pairs on one shared set of sample
/// quadruples. With `swap_yz` the roles of `y` and `z` are exchanged, which
/// maps `h(k₁,k₂)` onto `h(k₂,k₁)` sample by sample.
pub fn h_estimate_pairs(
    cov: &dyn RadialCovariance,
    pairs: &[(usize, usize)],
    domain: &DomainSpec,
    n_samples: usize,
    seed: u64,
    swap_yz: bool,
) -> Result<Vec<ContractionEstimate>> {
    domain.validate()?;
    if n_samples < MIN_SAMPLES {
        return Err(Error::Config(format!("n_samples = {n_samples} is below the minimum {MIN_SAMPLES}")));
    }
    if pairs.iter().any(|&(a, b)| a == 0 || b == 0) {
        return Err(Error::Config("contraction powers k1, k2 must be >= 1".into()));
    }
    if cov.dim() != domain.d {
        return Err(Error::Config("covariance and domain dimensions differ".into()));
    }
    let d = domain.d;
    let chunks = n_samples.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, Purpose::Contraction, c as u64);
            let count = CHUNK.min(n_samples - c * CHUNK);
            let mut acc = vec![Moments::default(); pairs.len()];
            let mut p = vec![0.0; 4 * d];
            for _ in 0..count {
                for j in 0..4 {
                    uniform_point(&mut rng, domain, &mut p[j * d..(j + 1) * d]);
                }
                let (x, mut y, mut z, w) = (&p[..d], &p[d..2 * d], &p[2 * d..3 * d], &p[3 * d..]);
                if swap_yz {
                    std::mem::swap(&mut y, &mut z);
                }
                let cxy = cov.eval(dist(x, y));
                let czw = cov.eval(dist(z, w));
                let cxz = cov.eval(dist(x, z));
                let cyw = cov.eval(dist(y, w));
                let a = cxy * czw;
                let b = cxz * cyw;
                for (m, &(k1, k2)) in acc.iter_mut().zip(pairs) {
                    m.push(a.powi(k1 as i32) * b.powi(k2 as i32));
                }
            }
            acc
        })
        .collect();
    let vol4 = domain.volume().powi(4);
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, &(k1, k2))| {
            let m = per_chunk.iter().fold(Moments::default(), |acc, c| acc.merge(c[i]));
            let var = if m.n > 1.0 { m.m2 / (m.n - 1.0) } else { 0.0 };
            ContractionEstimate {
                k1,
                k2,
                t: domain.t,
                mean: vol4 * m.mean,
                stderr: vol4 * (var / m.n).sqrt(),
                n_samples,
                seed,
            }
        })
        .collect())
}

/// Plain Monte Carlo estimate of `h_t(k₁,k₂)` over `(tD)⁴`.
pub fn h_estimate(
    cov: &dyn RadialCovariance,
    k1: usize,
    k2: usize,
    domain: &DomainSpec,
    n_samples: usize,
    seed: u64,
) -> Result<ContractionEstimate> {
    Ok(h_estimate_pairs(cov, &[(k1, k2)], domain, n_samples, seed, false)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiEstimate {
    pub value: f64,
    pub argmax: (usize, usize),
    /// Bound on `√h_t(k₁,k₂)/σ_t²` over all pairs with `k₁ + k₂ > K_cap`.
    pub cap_residual: f64,
    pub inconclusive: bool,
    pub sigma2: f64,
    pub m: usize,
    pub k_cap: usize,
    pub pairs: Vec<ContractionEstimate>,
}

impl XiEstimate {
    /// `√h/σ²` for one evaluated pair, negative estimates clamped at 0.
    pub fn normalized(&self, e: &ContractionEstimate) -> f64 {
        e.mean.max(0.0).sqrt() / self.sigma2
    }
}

/// `ξ_m(t) ≈ max_{k₁,k₂ ≥ 1, m ≤ k₁+k₂ ≤ K_cap} √h_t(k₁,k₂) / σ_t²`.
///
/// Omitted pairs are bounded with `|C| ≤ 1`:
/// `h_t(k₁,k₂) ≤ vol(tD) · M_{k₁} M_{k₂} · min(M_{k₁}, M_{k₂})` where
/// `M_k = ∫_{|u| ≤ diam(tD)} |C|^k`, which decreases in `k`.
#[allow(clippy::too_many_arguments)]
pub fn xi_estimate(
    model: &CovarianceModel,
    expansion: &HermiteExpansion,
    domain: &DomainSpec,
    m: usize,
    k_cap: usize,
    n_samples: usize,
    seed: u64,
) -> Result<XiEstimate> {
    if m < 1 {
        return Err(Error::Config("threshold m must be >= 1".into()));
    }
    if k_cap < m + 1 {
        return Err(Error::Config(format!("K_cap = {k_cap} must be at least m + 1 = {}", m + 1)));
    }
    let rank = expansion.rank.finite().unwrap_or(1);
    let (var, _) = sigma_proxy(model, expansion, domain, rank)?;
    let sigma2 = var.total;
    if !(sigma2 > 1e-12) {
        return Err(Error::Degenerate(format!("σ_t² = {sigma2:e} is too small to normalize by")));
    }
    let pairs: Vec<(usize, usize)> = (2.max(m)..=k_cap)
        .flat_map(|s| (1..s).map(move |k1| (k1, s - k1)))
        .collect();
    let est = h_estimate_pairs(model, &pairs, domain, n_samples, seed, false)?;
    let (mut value, mut argmax) = (f64::NEG_INFINITY, (0, 0));
    for e in &est {
        let v = e.mean.max(0.0).sqrt() / sigma2;
        if v > value {
            value = v;
            argmax = (e.k1, e.k2);
        }
    }
    let diam = domain.diameter();
    let moments = (1..=k_cap)
        .map(|k| cov_moment(model, k, Radius::Finite(diam), false).map(|x| x.value + x.err))
        .collect::<Result<Vec<f64>>>()?;
    let vol = domain.volume();
    let s = k_cap + 1;
    let cap_residual = (1..s)
        .map(|k1| {
            let (a, b) = (moments[k1.min(k_cap) - 1], moments[(s - k1).min(k_cap) - 1]);
            (vol * a * b * a.min(b)).sqrt() / sigma2
        })
        .fold(0.0, f64::max);
    Ok(XiEstimate {
        value,
        argmax,
        cap_residual,
        inconclusive: cap_residual > value,
        sigma2,
        m,
        k_cap,
        pairs: est,
    })
}

/// `∫∫_{(tD)²} C²`, the second-chaos variance without its coefficient.
pub fn second_chaos_variance(model: &CovarianceModel, domain: &DomainSpec) -> Result<f64> {
    Ok(double_integral(model, 2, domain)?.0)
}

fn factorial(n: u32) -> u128 {
    (1..=n as u128).product()
}

fn binomial(n: u32, k: u32) -> u128 {
    let k = k.min(n - k) as u128;
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n as u128 - i) / (i + 1);
    }
    r
}

/// `(Σ_r [r! C(p,r) C(q,r)]² (p+q-2r)!, 3^{p+q} p! q!)` in exact integers.
pub fn product_moment_sides(p: u32, q: u32) -> (u128, u128) {
    let lhs = (0..=p.min(q))
        .map(|r| {
            let c = factorial(r) * binomial(p, r) * binomial(q, r);
            c * c * factorial(p + q - 2 * r)
        })
        .sum();
    let rhs = 3u128.pow(p + q) * factorial(p) * factorial(q);
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_covariance_gives_volume_power() {
        let dom = DomainSpec::ball(2, 1.5).unwrap();
        let e = h_estimate(&UnitCovariance { d: 2 }, 2, 3, &dom, 1000, 1).unwrap();
        assert!((e.mean - dom.volume().powi(4)).abs() < 1e-9 * e.mean);
        assert_eq!(e.stderr, 0.0);
        assert!(h_estimate(&UnitCovariance { d: 2 }, 1, 1, &dom, 99, 1).is_err());
    }

    #[test]
    fn symmetry_under_swap() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let dom = DomainSpec::ball(1, 2.0).unwrap();
        let a = h_estimate_pairs(&m, &[(1, 3)], &dom, 20_000, 5, false).unwrap()[0];
        let b = h_estimate_pairs(&m, &[(3, 1)], &dom, 20_000, 5, true).unwrap()[0];
        assert!((a.mean - b.mean).abs() <= 3.0 * (a.stderr.hypot(b.stderr)) + 1e-12 * a.mean);
        assert!((a.mean - b.mean).abs() < 1e-10 * a.mean);
    }

    #[test]
    fn exponential_matches_tensor_grid_oracle() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let dom = DomainSpec::cube(1, 2.0).unwrap();
        let e = h_estimate(&m, 1, 1, &dom, 400_000, 8).unwrap();
        // midpoint rule on a 40^4 grid over [-1,1]^4
        let n = 40;
        let h = 2.0 / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| -1.0 + h * (i as f64 + 0.5)).collect();
        let mut s = 0.0;
        for &x in &xs {
            for &y in &xs {
                let a = (-(x - y).abs()).exp();
                for &z in &xs {
                    let b = (-(x - z).abs()).exp();
                    for &w in &xs {
                        s += a * (-(z - w).abs()).exp() * b * (-(y - w).abs()).exp();
                    }
                }
            }
        }
        s *= h.powi(4);
        assert!((e.mean - s).abs() < 3.0 * e.stderr, "{} ± {} vs {s}", e.mean, e.stderr);
    }

    #[test]
    fn even_powers_nonnegative_and_reproducible() {
        let m = CovarianceModel::berry(2).unwrap();
        let dom = DomainSpec::ball(2, 3.0).unwrap();
        let a = h_estimate(&m, 2, 2, &dom, 5000, 3).unwrap();
        let b = h_estimate(&m, 2, 2, &dom, 5000, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.mean >= -3.0 * a.stderr);
    }

    #[test]
    fn product_moment_inequality_holds() {
        for p in 0..=12 {
            for q in 0..=12 {
                let (l, r) = product_moment_sides(p, q);
                assert!(l <= r, "p={p} q={q}");
            }
        }
        // p = q = 1: 1·2! + 1·0! = 3 ≤ 9
        assert_eq!(product_moment_sides(1, 1), (3, 9));
    }

    #[test]
    fn cauchy_schwarz_chain() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let dom = DomainSpec::ball(1, 4.0).unwrap();
        for q in 2..=4usize {
            let exact = double_integral(&m, q, &dom).unwrap().0;
            let pairs: Vec<(usize, usize)> = (1..q).map(|r| (r, q - r)).collect();
            for e in h_estimate_pairs(&m, &pairs, &dom, 20_000, 17, false).unwrap() {
                let root = e.mean.max(0.0).sqrt();
                let root_err = e.stderr / (2.0 * root.max(1e-300));
                assert!(root <= exact + 3.0 * root_err, "q={q} {:?}", (e.k1, e.k2));
            }
        }
    }

    #[test]
    fn xi_dominates_members_and_is_monotone_in_m() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let e = crate::hermite::Observable::Indicator { u: 0.5 }.expansion(120).unwrap();
        let dom = DomainSpec::ball(1, 3.0).unwrap();
        let x3 = xi_estimate(&m, &e, &dom, 3, 9, 4000, 2).unwrap();
        for p in &x3.pairs {
            assert!(x3.value >= x3.normalized(p));
        }
        let x5 = xi_estimate(&m, &e, &dom, 5, 9, 4000, 2).unwrap();
        assert!(x5.value <= x3.value + 1e-15);
        assert!(x3.cap_residual.is_finite());
    }
}
