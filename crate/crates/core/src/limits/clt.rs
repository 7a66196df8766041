use super::carrier::{default_waves, Carrier, Source};
use super::distance::{ks_gauss, shape_stats, wasserstein1_gauss};
use super::{expansion_digest, ExperimentReport, Provenance, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::functionals::{chaos_sums, default_spacing, exact_variance, sigma_proxy, weighted_sum, DomainSpec, Lattice, Shape};
use crate::hermite::{HermiteExpansion, Observable, Rank, MAX_DEGREE};
use crate::rng::child_seed;
use crate::specialfn::{CovarianceModel, ModelKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn default_shape() -> Shape {
    Shape::Ball
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltConfig {
    pub model: CovarianceModel,
    /// Observable spec, e.g. `hermite:2` or `indicator:0`.
    pub phi: String,
    #[serde(default = "default_shape")]
    pub shape: Shape,
    pub t_list: Vec<f64>,
    pub n_reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub drop_first_chaos: bool,
    /// Use `Σ_{q ≤ N} a_q H_q` and `σ_{t,N}` instead of `φ` and `σ_t`.
    #[serde(default)]
    pub truncation: Option<usize>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub carrier: Carrier,
    #[serde(default)]
    pub k_waves: Option<usize>,
    /// Digest of the expansion actually used; checked when supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion_digest: Option<String>,
}

impl CltConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.t_list.is_empty() || self.t_list.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::Config("t_list must be a nonempty list of positive numbers".into()));
        }
        if self.n_reps < 2 {
            return Err(Error::Config(format!("n_reps = {} must be >= 2", self.n_reps)));
        }
        if let Some(h) = self.h {
            if !(h > 0.0) {
                return Err(Error::Config(format!("grid spacing h must be positive, got {h}")));
            }
        }
        if self.k_waves == Some(0) {
            return Err(Error::Config("k_waves must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltResult {
    pub t: f64,
    pub n_reps: usize,
    pub h: f64,
    pub n_star: usize,
    pub sigma2: f64,
    pub sigma2_err: f64,
    pub w1: f64,
    pub ks: f64,
    pub ks_p_value: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub skewness_stderr: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_stderr: f64,
    pub clipped_mass: f64,
    pub seed: u64,
}

const EXCLUDED_LIST: &str =
    "excluding the cases: φ linear; R=3, a4=0, d=2; R=3, d=3; R=1, R'=3, a4=0, d=2; R=1, R'=3, d=3";

/// The Berry-model CLT is stated excluding a few (rank, dimension)
/// combinations; returns the warning text when `expansion` hits one.
pub fn excluded_case(model: &CovarianceModel, expansion: &HermiteExpansion) -> Option<String> {
    if model.kind != ModelKind::Berry {
        return None;
    }
    let tol = expansion.rank_tol;
    let a4_zero = expansion.coeff(4).abs() <= tol;
    let d = model.d;
    let linear = expansion.rank == Rank::Finite(1) && expansion.second_rank == Rank::Infinite;
    let case = if linear {
        Some("φ linear".to_string())
    } else {
        match (expansion.rank, expansion.second_rank, d) {
            (Rank::Finite(3), _, 2) if a4_zero => Some("R=3, a4=0, d=2".into()),
            (Rank::Finite(3), _, 3) => Some("R=3, d=3".into()),
            (Rank::Finite(1), Rank::Finite(3), 2) if a4_zero => Some("R=1, R'=3, a4=0, d=2".into()),
            (Rank::Finite(1), Rank::Finite(3), 3) => Some("R=1, R'=3, d=3".into()),
            _ => None,
        }
    };
    case.map(|c| format!("excluded case ({c}) for the Berry model CLT, which is stated {EXCLUDED_LIST}"))
}

pub(crate) fn prepare(phi: &Observable, drop_first: bool, truncation: Option<usize>) -> Result<(Observable, HermiteExpansion)> {
    let mut obs = phi.clone();
    if drop_first {
        obs = obs.without_chaos(&[1])?;
    }
    if let Some(n) = truncation {
        obs = obs.truncated(n)?;
    }
    let order = match obs.polynomial_degree() {
        Some(p) => p.max(1),
        None => MAX_DEGREE,
    };
    let e = obs.expansion(order)?;
    Ok((obs, e))
}

pub(crate) fn resolve_sigma(
    model: &CovarianceModel,
    e: &HermiteExpansion,
    domain: &DomainSpec,
    truncation: Option<usize>,
) -> Result<(usize, f64, f64)> {
    let rank = e
        .rank
        .finite()
        .ok_or_else(|| Error::Degenerate("observable has no nonconstant chaos; Y_t is deterministic".into()))?;
    let v = match truncation {
        Some(n) => exact_variance(model, e, domain, n.min(e.order()))?,
        None => sigma_proxy(model, e, domain, rank)?.0,
    };
    if !(v.total > 1e-12) {
        return Err(Error::Degenerate(format!("σ² = {:e} is below 1e-12", v.total)));
    }
    Ok((v.n, v.total, v.err))
}

/// Runs the replicate experiment for a custom observable.
pub fn clt_run(cfg: &CltConfig, phi: &Observable) -> Result<ExperimentReport<CltConfig, CltResult>> {
    cfg.validate()?;
    let model = &cfg.model;
    let base_exp = phi.expansion(phi.polynomial_degree().unwrap_or(MAX_DEGREE).max(4))?;
    let mut warnings: Vec<String> = excluded_case(model, &base_exp).into_iter().collect();
    let (obs, e) = prepare(phi, cfg.drop_first_chaos, cfg.truncation)?;
    if let Some(w) = &e.warning {
        warnings.push(w.clone());
    }
    let digest = expansion_digest(&e);
    if let Some(given) = &cfg.expansion_digest {
        if *given != digest {
            return Err(Error::Config(format!("expansion digest {given} does not match the computed {digest}")));
        }
    }
    let h = cfg.h.unwrap_or_else(|| default_spacing(model));
    let t_max = cfg.t_list.iter().cloned().fold(0.0, f64::max);
    let d = model.d;
    let k = cfg.k_waves.unwrap_or_else(|| default_waves(d, 2.0 * t_max));
    let mut results = Vec::with_capacity(cfg.t_list.len());
    for (j, &t) in cfg.t_list.iter().enumerate() {
        let domain = DomainSpec { shape: cfg.shape, t, d };
        domain.validate()?;
        if let Some(l) = domain.label() {
            if !warnings.iter().any(|w| w == l) {
                warnings.push(l.to_string());
            }
        }
        let (n_star, sigma2, sigma2_err) = resolve_sigma(model, &e, &domain, cfg.truncation)?;
        let seed_t = child_seed(cfg.seed, j as u64);
        let lattice = Lattice::new(&domain, h)?;
        let source = Source::new(model, cfg.carrier, domain.reach(), h, k, seed_t)?;
        let mean = e.coeff(0) * lattice.total_weight();
        let sigma = sigma2.sqrt();
        let pairs = cfg.n_reps.div_ceil(2);
        let values: Vec<f64> = (0..pairs as u64)
            .into_par_iter()
            .map(|p| {
                let [a, b] = source.pair(&lattice, seed_t, p)?;
                let f = |v: &Vec<f64>| (weighted_sum(&lattice.weights, v, |x| obs.eval(x)) - mean) / sigma;
                Ok([f(&a), f(&b)])
            })
            .collect::<Result<Vec<[f64; 2]>>>()?
            .into_iter()
            .flatten()
            .take(cfg.n_reps)
            .collect();
        let ks = ks_gauss(&values)?;
        let stats = shape_stats(&values, seed_t)?;
        results.push(CltResult {
            t,
            n_reps: cfg.n_reps,
            h,
            n_star,
            sigma2,
            sigma2_err,
            w1: wasserstein1_gauss(&values)?,
            ks: ks.statistic,
            ks_p_value: ks.p_value,
            mean: stats.mean,
            variance: stats.variance,
            skewness: stats.skewness,
            skewness_stderr: stats.skewness_stderr,
            excess_kurtosis: stats.excess_kurtosis,
            kurtosis_stderr: stats.kurtosis_stderr,
            clipped_mass: source.clipped_mass(),
            seed: seed_t,
        });
    }
    let mut resolved = cfg.clone();
    resolved.h = Some(h);
    if model.kind == ModelKind::Berry && cfg.carrier != Carrier::Circulant {
        resolved.k_waves = Some(k);
    }
    resolved.expansion_digest = Some(digest);
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        command: "clt".into(),
        config: resolved,
        results,
        warnings,
        provenance: Provenance::now(),
    })
}

/// Replicate CLT experiment: for each `t`, `n_reps` independent
/// realizations of `(Y_t - E Y_t)/σ_t` and their distance to `N(0,1)`.
pub fn clt_experiment(cfg: &CltConfig) -> Result<ExperimentReport<CltConfig, CltResult>> {
    let phi = Observable::parse(&cfg.phi)?;
    clt_run(cfg, &phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    /// Monte Carlo mean of `|Y_t/σ_t - Y_{t,N}/σ_{t,N}|²`.
    pub mean_sq: f64,
    pub stderr: f64,
    /// `4(σ_t - σ_{t,N})/σ_t`.
    pub bound: f64,
    pub sigma_t: f64,
    pub sigma_tn: f64,
    pub n_star: usize,
    pub n_reps: usize,
}

/// Checks the reduction step: the untruncated and `N`-truncated normalized
/// functionals are computed on the same realizations.
#[allow(clippy::too_many_arguments)]
pub fn reduction_experiment(
    model: &CovarianceModel,
    phi: &Observable,
    domain: &DomainSpec,
    n: usize,
    n_reps: usize,
    seed: u64,
    h: f64,
    carrier: Carrier,
) -> Result<ReductionReport> {
    if n_reps < 2 {
        return Err(Error::Config("n_reps must be >= 2".into()));
    }
    let e = phi.expansion(phi.polynomial_degree().unwrap_or(MAX_DEGREE).max(n))?;
    let (n_star, s2, _) = resolve_sigma(model, &e, domain, None)?;
    let (_, s2n, _) = resolve_sigma(model, &e, domain, Some(n))?;
    let (sigma_t, sigma_tn) = (s2.sqrt(), s2n.sqrt());
    let lattice = Lattice::new(domain, h)?;
    let k = default_waves(domain.d, domain.diameter());
    let source = Source::new(model, carrier, domain.reach(), h, k, seed)?;
    let mean = e.coeff(0) * lattice.total_weight();
    let diffs: Vec<f64> = (0..n_reps.div_ceil(2) as u64)
        .into_par_iter()
        .map(|p| {
            let vals = source.pair(&lattice, seed, p)?;
            Ok(vals.map(|v| {
                let y = weighted_sum(&lattice.weights, &v, |x| phi.eval(x)) - mean;
                let sums = chaos_sums(&lattice.weights, &v, n);
                let yn: f64 = (1..=n).map(|q| e.coeff(q) * sums[q]).sum();
                (y / sigma_t - yn / sigma_tn).powi(2)
            }))
        })
        .collect::<Result<Vec<[f64; 2]>>>()?
        .into_iter()
        .flatten()
        .take(n_reps)
        .collect();
    let m = diffs.len() as f64;
    let mean_sq = diffs.iter().sum::<f64>() / m;
    let var = diffs.iter().map(|x| (x - mean_sq).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(ReductionReport {
        mean_sq,
        stderr: (var / m).sqrt(),
        bound: 4.0 * (sigma_t - sigma_tn) / sigma_t,
        sigma_t,
        sigma_tn,
        n_star,
        n_reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(phi: &str, model: CovarianceModel, t_list: Vec<f64>, n_reps: usize, seed: u64) -> CltConfig {
        CltConfig {
            model,
            phi: phi.into(),
            shape: Shape::Ball,
            t_list,
            n_reps,
            seed,
            drop_first_chaos: false,
            truncation: None,
            h: None,
            carrier: Carrier::Auto,
            k_waves: None,
            expansion_digest: None,
        }
    }

    #[test]
    fn linear_observable_is_exactly_gaussian() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let passes = (0..20)
            .filter(|&b| {
                let r = clt_experiment(&cfg("hermite:1", m, vec![4.0], 500, 1000 + b)).unwrap();
                r.results[0].ks_p_value > 0.01
            })
            .count();
        assert!(passes >= 18, "{passes}/20");
    }

    #[test]
    fn normalized_variance_is_one() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let mut c = cfg("hermite:2", m, vec![8.0], 2000, 5);
        c.h = Some(0.05);
        let r = clt_experiment(&c).unwrap().results[0].clone();
        // Var of a sample variance: (μ4 - 1)/n with μ4 ≈ 3 + excess
        let se = ((2.0 + r.excess_kurtosis) / 2000.0).sqrt();
        assert!((r.variance - 1.0).abs() < 4.0 * se, "{} ± {se}", r.variance);
    }

    #[test]
    fn excluded_case_matrix() {
        let exp = |coeffs: &[f64]| HermiteExpansion::from_coeffs(coeffs, None, 1e-9);
        let b2 = CovarianceModel::berry(2).unwrap();
        let b3 = CovarianceModel::berry(3).unwrap();
        let cases: Vec<(&CovarianceModel, Vec<f64>, bool)> = vec![
            (&b2, vec![0.0, 1.0, 0.0, 0.0, 0.0], true),
            (&b2, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.5], true),
            (&b2, vec![0.0, 0.0, 0.0, 1.0, 0.5], false),
            (&b3, vec![0.0, 0.0, 0.0, 1.0, 0.5], true),
            (&b2, vec![0.0, 1.0, 0.0, 1.0, 0.0], true),
            (&b2, vec![0.0, 1.0, 0.0, 1.0, 0.2], false),
            (&b3, vec![0.0, 1.0, 0.0, 1.0, 0.2], true),
            (&b2, vec![0.0, 1.0, 1.0, 0.0, 0.0], false),
            (&b2, vec![0.0, 0.0, 1.0, 0.0, 0.0], false),
        ];
        for (m, c, expect) in cases {
            let w = excluded_case(m, &exp(&c));
            assert_eq!(w.is_some(), expect, "{c:?} d={}", m.d);
            if let Some(w) = w {
                assert!(w.contains("excluding the cases"));
            }
        }
        let e = CovarianceModel::exponential(1.0, 2).unwrap();
        assert!(excluded_case(&e, &exp(&[0.0, 1.0])).is_none());
    }

    #[test]
    fn report_round_trip_and_thread_independence() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let c = cfg("indicator:0.5", m, vec![2.0, 4.0], 200, 77);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| clt_experiment(&c).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.results, b.results);
        assert_eq!(a.config, b.config);
        let json = a.to_json().unwrap();
        let back: ExperimentReport<CltConfig, CltResult> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.config.h, Some(0.125));
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
    }

    #[test]
    fn berry_planewave_runs_and_warns() {
        let m = CovarianceModel::berry(2).unwrap();
        let r = clt_experiment(&cfg("hermite:3", m, vec![3.0], 20, 1)).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("R=3, a4=0, d=2")));
        assert_eq!(r.config.k_waves, Some(256));
    }

    #[test]
    fn degenerate_observable_is_an_error() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let e = clt_experiment(&cfg("series:1.0", m, vec![2.0], 10, 1)).unwrap_err();
        assert!(matches!(e, Error::Degenerate(_)));
    }

    #[test]
    fn reduction_small_run() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let dom = DomainSpec::ball(1, 4.0).unwrap();
        let r = reduction_experiment(&m, &Observable::Indicator { u: 0.0 }, &dom, 4, 400, 3, 0.05, Carrier::Auto).unwrap();
        assert!(r.sigma_tn <= r.sigma_t);
        assert!(r.mean_sq >= 0.0 && r.mean_sq < 0.2);
    }
}
