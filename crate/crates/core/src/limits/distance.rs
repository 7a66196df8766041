use crate::error::{Error, Result};
use crate::quad::{pairwise_sum, GaussLegendre};
use crate::rng::{stream, Purpose};
use crate::specialfn::{gauss_cdf, gauss_pdf, gauss_quantile_unchecked};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Replicate values of a normalized functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub t: f64,
    pub fingerprint: String,
    pub seeds: Vec<u64>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, t: f64, fingerprint: String, seeds: Vec<u64>) -> Result<Self> {
        check(&values)?;
        Ok(SampleSet { values, t, fingerprint, seeds })
    }
}

fn check(values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::Data(format!("need at least 2 samples, got {}", values.len())));
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Data(format!("sample {i} is not finite ({v})")));
    }
    Ok(())
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// `∫_0^u Φ⁻¹(v) dv = -φ(Φ⁻¹(u))`.
fn quantile_primitive(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        -gauss_pdf(gauss_quantile_unchecked(u))
    }
}

/// `∫_a^b |x - Φ⁻¹(u)| du` in closed form.
fn cell_exact(x: f64, a: f64, b: f64) -> f64 {
    let c = gauss_cdf(x).clamp(a, b);
    let g = quantile_primitive;
    (x * (c - a) - (g(c) - g(a))) + ((g(b) - g(c)) - x * (b - c))
}

fn cell_quadrature(x: f64, a: f64, b: f64) -> f64 {
    let gl = GaussLegendre::sixteen();
    let f = |u: f64| (x - gauss_quantile_unchecked(u)).abs();
    let c = gauss_cdf(x);
    if c > a && c < b {
        gl.integrate(f, a, c) + gl.integrate(f, c, b)
    } else {
        gl.integrate(f, a, b)
    }
}

/// `W₁(empirical, N(0,1)) = ∫_0^1 |F_n⁻¹(u) - Φ⁻¹(u)| du`: 16-point
/// Gauss–Legendre per quantile cell (split at the kink), with the outer half
/// of the two extreme cells integrated exactly.
pub fn wasserstein1_gauss(samples: &[f64]) -> Result<f64> {
    check(samples)?;
    let s = sorted(samples);
    let n = s.len() as f64;
    let last = s.len() - 1;
    let parts: Vec<f64> = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let a = i as f64 / n;
            let b = (i + 1) as f64 / n;
            match i {
                0 => cell_exact(x, 0.0, 0.5 / n) + cell_quadrature(x, 0.5 / n, b),
                _ if i == last => cell_quadrature(x, a, 1.0 - 0.5 / n) + cell_exact(x, 1.0 - 0.5 / n, 1.0),
                _ => cell_quadrature(x, a, b),
            }
        })
        .collect();
    Ok(pairwise_sum(&parts))
}

/// The same distance using the closed-form cell integrals throughout.
pub fn wasserstein1_gauss_exact(samples: &[f64]) -> Result<f64> {
    check(samples)?;
    let s = sorted(samples);
    let n = s.len() as f64;
    let parts: Vec<f64> =
        s.iter().enumerate().map(|(i, &x)| cell_exact(x, i as f64 / n, (i + 1) as f64 / n)).collect();
    Ok(pairwise_sum(&parts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov–Smirnov distance to `N(0,1)` with the Stephens-corrected
/// asymptotic p-value.
pub fn ks_gauss(samples: &[f64]) -> Result<KsResult> {
    check(samples)?;
    let s = sorted(samples);
    let n = s.len() as f64;
    let statistic = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = gauss_cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * statistic;
    Ok(KsResult { statistic, p_value: kolmogorov_survival(lambda) })
}

/// `P(K > λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Sample shape statistics with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeStats {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub skewness_stderr: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_stderr: f64,
}

fn shape(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let c: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let m = |p: i32| pairwise_sum(&c.iter().map(|x| x.powi(p)).collect::<Vec<_>>()) / n;
    let (m2, m3, m4) = (m(2), m(3), m(4));
    (mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

const BOOTSTRAP: usize = 200;

/// Moment estimators; standard errors are the larger of the normal-theory
/// value and a fixed-seed bootstrap.
pub fn shape_stats(values: &[f64], seed: u64) -> Result<ShapeStats> {
    check(values)?;
    let n = values.len();
    let (mean, m2, skewness, excess_kurtosis) = shape(values);
    let mut rng = stream(seed, Purpose::Bootstrap, 0);
    let mut sk = Vec::with_capacity(BOOTSTRAP);
    let mut ku = Vec::with_capacity(BOOTSTRAP);
    let mut buf = vec![0.0; n];
    for _ in 0..BOOTSTRAP {
        for b in buf.iter_mut() {
            *b = values[rng.random_range(0..n)];
        }
        let (_, _, s, k) = shape(&buf);
        sk.push(s);
        ku.push(k);
    }
    let sd = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let nf = n as f64;
    Ok(ShapeStats {
        mean,
        variance: m2 * nf / (nf - 1.0),
        skewness,
        skewness_stderr: (6.0 / nf).sqrt().max(sd(&sk)),
        excess_kurtosis,
        kurtosis_stderr: (24.0 / nf).sqrt().max(sd(&ku)),
    })
}
