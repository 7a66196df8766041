use super::carrier::{default_waves, Carrier, Source};
use super::clt::{prepare, resolve_sigma};
use crate::error::{Error, Result};
use crate::fieldgen::Realization;
use crate::functionals::{default_spacing, sample_on_lattice, weighted_sum, DomainSpec, Lattice, Shape};
use crate::hermite::Observable;
use crate::specialfn::{gauss_cdf, gauss_pdf, CovarianceModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Bounded Lipschitz test functions with `|g| ≤ 1`, `Lip(g) ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    Cos,
    Sin,
    /// `clamp(x, -2, 2) / 2`.
    Clamp,
    /// `exp(-x²/2)`.
    GaussBump,
    /// `g ≡ 1`.
    One,
}

impl TestFunction {
    pub const DEFAULTS: [TestFunction; 4] = [TestFunction::Cos, TestFunction::Sin, TestFunction::Clamp, TestFunction::GaussBump];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::Cos => x.cos(),
            TestFunction::Sin => x.sin(),
            TestFunction::Clamp => 0.5 * x.clamp(-2.0, 2.0),
            TestFunction::GaussBump => (-0.5 * x * x).exp(),
            TestFunction::One => 1.0,
        }
    }

    /// `E g(Z)` for `Z ~ N(0,1)`.
    pub fn gaussian_mean(self) -> f64 {
        match self {
            TestFunction::Cos => (-0.5f64).exp(),
            TestFunction::Sin => 0.0,
            TestFunction::Clamp => 0.5 * Self::clipped_mean(-2.0, 2.0),
            TestFunction::GaussBump => std::f64::consts::FRAC_1_SQRT_2,
            TestFunction::One => 1.0,
        }
    }

    /// `E clamp(Z, a, b)` for `Z ~ N(0,1)`.
    pub fn clipped_mean(a: f64, b: f64) -> f64 {
        a * gauss_cdf(a) + b * (1.0 - gauss_cdf(b)) + gauss_pdf(a) - gauss_pdf(b)
    }

    pub fn id(self) -> &'static str {
        match self {
            TestFunction::Cos => "cos",
            TestFunction::Sin => "sin",
            TestFunction::Clamp => "clamp",
            TestFunction::GaussBump => "gauss_bump",
            TestFunction::One => "one",
        }
    }
}

/// Geometric grid `t_1 = t1, ..., t_n = T` with ratio close to `ratio`, and
/// trapezoid weights in `log t` divided by `log T`.
pub fn log_grid(t1: f64, horizon: f64, ratio: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(t1 >= 1.0) || !(horizon > t1) || !(ratio > 1.0) {
        return Err(Error::Config(format!(
            "log grid needs 1 <= t1 < T and ratio > 1 (t1={t1}, T={horizon}, ratio={ratio})"
        )));
    }
    let span = (horizon / t1).ln();
    let n = (span / ratio.ln()).ceil().max(1.0) as usize;
    let step = span / n as f64;
    let ts: Vec<f64> = (0..=n).map(|i| if i == n { horizon } else { t1 * (step * i as f64).exp() }).collect();
    let norm = horizon.ln();
    let ws = (0..=n)
        .map(|i| if i == 0 || i == n { 0.5 * step / norm } else { step / norm })
        .collect();
    Ok((ts, ws))
}

/// `Σ_i w_i g(F_{t_i})`.
pub fn log_average(weights: &[f64], f: &[f64], g: TestFunction) -> f64 {
    weights.iter().zip(f).map(|(w, x)| w * g.eval(*x)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsclConfig {
    pub model: CovarianceModel,
    pub phi: String,
    #[serde(default = "ball")]
    pub shape: Shape,
    /// Horizons `T`; all are evaluated on one realization.
    pub horizons: Vec<f64>,
    #[serde(default = "one")]
    pub t1: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_g")]
    pub g_list: Vec<TestFunction>,
    pub seed: u64,
    #[serde(default)]
    pub carrier: Carrier,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub k_waves: Option<usize>,
    #[serde(default)]
    pub drop_first_chaos: bool,
}

fn ball() -> Shape {
    Shape::Ball
}
fn one() -> f64 {
    1.0
}
fn default_ratio() -> f64 {
    1.05
}
fn default_g() -> Vec<TestFunction> {
    TestFunction::DEFAULTS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogAverage {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub g_id: String,
    pub value: f64,
    /// `E g(Z)`.
    pub target: f64,
    pub discrepancy: f64,
    pub weight_sum: f64,
    pub n_grid: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub t_grid: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub weights: Vec<f64>,
}

/// `F_t` for every grid point of one path. In d = 1 on a grid carrier this
/// is one prefix-sum pass over `φ(B)`.
fn normalized_path(
    path: &dyn Realization,
    obs: &Observable,
    a0: f64,
    sigmas: &[f64],
    ts: &[f64],
    template: &DomainSpec,
    h: f64,
) -> Result<Vec<f64>> {
    if let (Some(grid), 1) = (path.lattice(), template.d) {
        let reach_max = template.with_t(ts[ts.len() - 1]).reach();
        if !grid.covers(reach_max) {
            return Err(Error::Config(format!("carrier grid smaller than T·D (needs half-width {reach_max})")));
        }
        // cells h(i + 1/2), i = -m..m-1, mirrored around 0
        let m = (reach_max / h).ceil() as usize + 1;
        let value = |i: i64| obs.eval(path.value_at(&[h * (i as f64 + 0.5)]));
        let mut prefix = vec![0.0; m + 1];
        for k in 0..m {
            prefix[k + 1] = prefix[k] + value(k as i64) + value(-(k as i64) - 1);
        }
        return Ok(ts
            .iter()
            .zip(sigmas)
            .map(|(&t, &s)| {
                let r = template.with_t(t).reach();
                let k = (r / h).floor() as usize;
                let frac = r / h - k as f64;
                let y = h * (prefix[k] + frac * (value(k as i64) + value(-(k as i64) - 1)));
                (y - a0 * 2.0 * r) / s
            })
            .collect());
    }
    ts.par_iter()
        .zip(sigmas)
        .map(|(&t, &s)| {
            let lattice = Lattice::new(&template.with_t(t), h)?;
            let v = sample_on_lattice(path, &lattice)?;
            let y = weighted_sum(&lattice.weights, &v, |x| obs.eval(x));
            Ok((y - a0 * lattice.total_weight()) / s)
        })
        .collect()
}

/// Single-path log averages `ν_T(g)` for each horizon and test function.
pub fn ascl_logaverage(cfg: &AsclConfig) -> Result<Vec<LogAverage>> {
    cfg.model.validate()?;
    if cfg.horizons.is_empty() {
        return Err(Error::Config("at least one horizon T is required".into()));
    }
    let phi = Observable::parse(&cfg.phi)?;
    let (obs, e) = prepare(&phi, cfg.drop_first_chaos, None)?;
    let model = &cfg.model;
    let d = model.d;
    let h = cfg.h.unwrap_or_else(|| default_spacing(model));
    let t_max = cfg.horizons.iter().cloned().fold(0.0, f64::max);
    let template = DomainSpec { shape: cfg.shape, t: t_max, d };
    template.validate()?;
    let k = cfg.k_waves.unwrap_or_else(|| default_waves(d, template.diameter()));
    let source = Source::new(model, cfg.carrier, template.reach() + h, h, k, cfg.seed)?;
    let path = source.path(cfg.seed);
    let mut out = Vec::new();
    for &horizon in &cfg.horizons {
        let (ts, ws) = log_grid(cfg.t1, horizon, cfg.ratio)?;
        let sigmas = ts
            .par_iter()
            .map(|&t| resolve_sigma(model, &e, &template.with_t(t), None).map(|(_, s2, _)| s2.sqrt()))
            .collect::<Result<Vec<f64>>>()?;
        let f = normalized_path(path.as_ref(), &obs, e.coeff(0), &sigmas, &ts, &template, h)?;
        for &g in &cfg.g_list {
            let value = log_average(&ws, &f, g);
            out.push(LogAverage {
                horizon,
                g_id: g.id().into(),
                value,
                target: g.gaussian_mean(),
                discrepancy: (value - g.gaussian_mean()).abs(),
                weight_sum: ws.iter().sum(),
                n_grid: ts.len(),
                seed: cfg.seed,
                t_grid: Vec::new(),
                weights: Vec::new(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_weights_sum_to_one_from_t1_equal_one() {
        let (ts, ws) = log_grid(1.0, 1e4, 1.05).unwrap();
        assert_eq!(ts[0], 1.0);
        assert_eq!(*ts.last().unwrap(), 1e4);
        let f = vec![0.3; ts.len()];
        assert!((log_average(&ws, &f, TestFunction::One) - 1.0).abs() < 1e-12);
        let (_, ws2) = log_grid(10.0, 1e4, 1.05).unwrap();
        let s: f64 = ws2.iter().sum();
        assert!((s - (1e4f64 / 10.0).ln() / 1e4f64.ln()).abs() < 1e-12);
        assert!(log_grid(0.5, 10.0, 1.05).is_err());
    }

    #[test]
    fn forced_zero_path() {
        let (_, ws) = log_grid(1.0, 100.0, 1.05).unwrap();
        let zeros = vec![0.0; ws.len()];
        assert!((log_average(&ws, &zeros, TestFunction::Cos) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_in_g() {
        let (ts, ws) = log_grid(1.0, 50.0, 1.05).unwrap();
        let f: Vec<f64> = ts.iter().map(|t| t.ln().sin() * 2.0).collect();
        let a = log_average(&ws, &f, TestFunction::Cos);
        let b = log_average(&ws, &f, TestFunction::Sin);
        let combo: f64 = ws.iter().zip(&f).map(|(w, x)| w * (2.0 * x.cos() - 0.5 * x.sin())).sum();
        assert!((combo - (2.0 * a - 0.5 * b)).abs() < 1e-14);
    }

    #[test]
    fn test_function_bounds_and_targets() {
        for g in TestFunction::DEFAULTS {
            for i in -400..=400 {
                let x = i as f64 / 40.0;
                assert!(g.eval(x).abs() <= 1.0);
                assert!((g.eval(x + 1e-3) - g.eval(x)).abs() <= 1e-3 * (1.0 + 1e-9));
            }
        }
        assert!(TestFunction::Clamp.gaussian_mean().abs() < 1e-15);
        // E clamp(Z, 0, ∞) = φ(0)
        assert!((TestFunction::clipped_mean(0.0, 50.0) - gauss_pdf(0.0)).abs() < 1e-15);
        let gl = crate::hermite::GaussHermite::new(200);
        let bump = gl.expectation(|x| TestFunction::GaussBump.eval(x));
        assert!((bump - TestFunction::GaussBump.gaussian_mean()).abs() < 1e-12);
    }

    #[test]
    fn prefix_path_matches_lattice_sums() {
        let cfg = AsclConfig {
            model: CovarianceModel::exponential(1.0, 1).unwrap(),
            phi: "hermite:2".into(),
            shape: Shape::Ball,
            horizons: vec![30.0],
            t1: 1.0,
            ratio: 1.05,
            g_list: vec![TestFunction::Cos],
            seed: 3,
            carrier: Carrier::Circulant,
            h: None,
            k_waves: None,
            drop_first_chaos: false,
        };
        let h = default_spacing(&cfg.model);
        let template = DomainSpec::ball(1, 30.0).unwrap();
        let source = Source::new(&cfg.model, Carrier::Circulant, 30.0 + h, h, 1, 3).unwrap();
        let path = source.path(3);
        let obs = Observable::Hermite(2);
        let ts = [1.0, 2.3, 7.77, 30.0];
        let ones = [1.0; 4];
        let fast = normalized_path(path.as_ref(), &obs, 0.0, &ones, &ts, &template, h).unwrap();
        for (t, f) in ts.iter().zip(&fast) {
            let lat = Lattice::new(&template.with_t(*t), h).unwrap();
            let v = sample_on_lattice(path.as_ref(), &lat).unwrap();
            let slow = weighted_sum(&lat.weights, &v, |x| obs.eval(x));
            assert!((slow - f).abs() < 1e-9 * (1.0 + slow.abs()), "t={t}: {slow} {f}");
        }
        let out = ascl_logaverage(&cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].value.abs() <= 1.0);
    }
}
