use super::{hermite_expand, hermite_normalized, sqrt_factorial, HermiteExpansion, DEFAULT_NODES};
use super::{DEFAULT_RANK_TOL, MAX_DEGREE};
use crate::error::{Error, Result};
use crate::specialfn::{gauss_cdf, gauss_pdf};
use std::fmt;
use std::sync::Arc;

/// An observable `φ: ℝ → ℝ` applied pointwise to the field.
#[derive(Clone)]
pub enum Observable {
    /// `H_q`.
    Hermite(usize),
    /// `1{x ≥ u}`.
    Indicator { u: f64 },
    /// `Σ_q a_q H_q(x)` with the given `a_q`.
    Series(Vec<f64>),
    /// Piecewise-linear interpolation of `(x, y)` pairs, constant outside.
    Table { xs: Vec<f64>, ys: Vec<f64> },
    Custom { id: String, f: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
    /// `base - Σ c_q H_q`.
    Adjusted { base: Box<Observable>, removed: Vec<(usize, f64)> },
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

fn hermite_unchecked(q: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if q == 0 {
        return 1.0;
    }
    for k in 1..q {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

impl Observable {
    /// Parses `hermite:q`, `indicator:u`, `series:a0,a1,...` or `table:<csv path>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, arg) = spec
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("observable spec '{spec}' needs the form kind:arg")))?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{s}' in observable spec '{spec}'")))
        };
        match kind {
            "hermite" => {
                let q = arg
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad Hermite degree in '{spec}'")))?;
                if q > MAX_DEGREE {
                    return Err(Error::Range(format!("Hermite degree {q} > {MAX_DEGREE}")));
                }
                Ok(Observable::Hermite(q))
            }
            "indicator" => Ok(Observable::Indicator { u: num(arg)? }),
            "series" => {
                let coeffs = arg.split(',').map(num).collect::<Result<Vec<_>>>()?;
                Ok(Observable::Series(coeffs))
            }
            "table" => {
                let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(arg.trim())?;
                let (mut xs, mut ys) = (Vec::new(), Vec::new());
                for rec in rdr.records() {
                    let rec = rec?;
                    if rec.len() < 2 {
                        return Err(Error::Config("table rows need two columns x,y".into()));
                    }
                    let (Ok(x), Ok(y)) = (rec[0].trim().parse::<f64>(), rec[1].trim().parse::<f64>())
                    else {
                        continue; // header row
                    };
                    xs.push(x);
                    ys.push(y);
                }
                Observable::table(xs, ys)
            }
            other => Err(Error::Config(format!(
                "unknown observable kind '{other}' (expected hermite, indicator, series or table)"
            ))),
        }
    }

    pub fn table(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "table observable needs >= 2 points with strictly increasing x".into(),
            ));
        }
        Ok(Observable::Table { xs, ys })
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(id: &str, f: F) -> Self {
        Observable::Custom { id: id.to_string(), f: Arc::new(f) }
    }

    /// Stable identifier used in reports.
    pub fn id(&self) -> String {
        match self {
            Observable::Hermite(q) => format!("hermite:{q}"),
            Observable::Indicator { u } => format!("indicator:{u}"),
            Observable::Series(a) => format!(
                "series:{}",
                a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            ),
            Observable::Table { xs, .. } => format!("table:{}pts", xs.len()),
            Observable::Custom { id, .. } => format!("custom:{id}"),
            Observable::Adjusted { base, removed } => {
                let qs: Vec<String> = removed.iter().map(|(q, _)| q.to_string()).collect();
                format!("{}-chaos[{}]", base.id(), qs.join(","))
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Observable::Hermite(q) => hermite_unchecked(*q, x),
            Observable::Indicator { u } => {
                if x >= *u {
                    1.0
                } else {
                    0.0
                }
            }
            Observable::Series(a) => {
                let (mut h0, mut h1) = (1.0, x);
                let mut sum = a.first().copied().unwrap_or(0.0);
                for (q, aq) in a.iter().enumerate().skip(1) {
                    if q >= 2 {
                        let h2 = x * h1 - (q - 1) as f64 * h0;
                        h0 = h1;
                        h1 = h2;
                    }
                    sum += aq * h1;
                }
                sum
            }
            Observable::Table { xs, ys } => {
                if x <= xs[0] {
                    return ys[0];
                }
                let n = xs.len();
                if x >= xs[n - 1] {
                    return ys[n - 1];
                }
                let i = xs.partition_point(|v| *v <= x) - 1;
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                ys[i] + t * (ys[i + 1] - ys[i])
            }
            Observable::Custom { f, .. } => f(x),
            Observable::Adjusted { base, removed } => {
                base.eval(x) - removed.iter().map(|(q, c)| c * hermite_unchecked(*q, x)).sum::<f64>()
            }
        }
    }

    /// Degree when `φ` is a polynomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            Observable::Hermite(q) => Some(*q),
            Observable::Series(a) => Some(a.len().saturating_sub(1)),
            Observable::Adjusted { base, removed } => {
                let b = base.polynomial_degree()?;
                Some(removed.iter().map(|(q, _)| *q).fold(b, usize::max))
            }
            _ => None,
        }
    }

    /// Hermite expansion up to `max_order`: closed forms where they exist,
    /// Gauss–Hermite quadrature otherwise.
    pub fn expansion(&self, max_order: usize) -> Result<HermiteExpansion> {
        if max_order > MAX_DEGREE {
            return Err(Error::Range(format!("expansion order {max_order} > {MAX_DEGREE}")));
        }
        let mut scaled = vec![0.0; max_order + 1];
        let m2 = match self {
            Observable::Hermite(k) => {
                if *k <= max_order {
                    scaled[*k] = sqrt_factorial(*k);
                }
                sqrt_factorial(*k).powi(2)
            }
            Observable::Indicator { u } => {
                let tail = 1.0 - gauss_cdf(*u);
                scaled[0] = tail;
                let h = hermite_normalized(*u, max_order);
                let dens = gauss_pdf(*u);
                for q in 1..=max_order {
                    scaled[q] = dens * h[q - 1] / (q as f64).sqrt();
                }
                tail
            }
            Observable::Series(a) => {
                let mut m2 = 0.0;
                for (q, aq) in a.iter().enumerate() {
                    let b = aq * sqrt_factorial(q);
                    m2 += b * b;
                    if q <= max_order {
                        scaled[q] = b;
                    }
                }
                m2
            }
            Observable::Table { .. } | Observable::Custom { .. } => {
                return hermite_expand(|x| self.eval(x), max_order, DEFAULT_NODES);
            }
            Observable::Adjusted { base, removed } => {
                let top = removed.iter().map(|(q, _)| *q).max().unwrap_or(0).max(max_order);
                let b = base.expansion(top)?;
                let mut m2 = b.second_moment;
                let mut full = b.scaled.clone();
                for &(q, c) in removed {
                    let sc = c * sqrt_factorial(q);
                    m2 = m2.map(|m| m - 2.0 * sc * full[q] + sc * sc);
                    full[q] -= sc;
                }
                full.truncate(max_order + 1);
                let mut e = HermiteExpansion::from_scaled(full, m2, DEFAULT_RANK_TOL);
                e.warning = b.warning;
                return Ok(e);
            }
        };
        Ok(HermiteExpansion::from_scaled(scaled, Some(m2), DEFAULT_RANK_TOL))
    }

    /// `φ - Σ_{q ∈ qs} a_q H_q`, e.g. dropping the first chaos.
    pub fn without_chaos(&self, qs: &[usize]) -> Result<Observable> {
        let top = qs.iter().copied().max().unwrap_or(0);
        let e = self.expansion(top.max(1))?;
        let removed = qs.iter().map(|&q| (q, e.coeff(q))).collect();
        Ok(Observable::Adjusted { base: Box::new(self.clone()), removed })
    }

    /// The polynomial `Σ_{q ≤ n} a_q H_q`.
    pub fn truncated(&self, n: usize) -> Result<Observable> {
        let e = self.expansion(n)?;
        Ok(Observable::Series(e.coeffs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::hermite_eval;
    use std::f64::consts::PI;

    #[test]
    fn indicator_closed_form_values() {
        let e = Observable::Indicator { u: 0.0 }.expansion(6).unwrap();
        let s = (2.0 * PI).sqrt();
        let expect = [0.5, 1.0 / s, 0.0, -1.0 / (6.0 * s), 0.0, 3.0 / (120.0 * s), 0.0];
        for q in 0..=6 {
            assert!((e.coeffs[q] - expect[q]).abs() < 1e-14, "q={q}");
        }
        assert!((e.coeffs[1] - 0.398_942).abs() < 1e-6);
        assert!((e.coeffs[3] + 0.066_490).abs() < 1e-6);
    }

    #[test]
    fn indicator_quadrature_path_agrees_with_closed_form() {
        let closed = Observable::Indicator { u: 0.7 }.expansion(8).unwrap();
        let quad = crate::hermite::hermite_expand(|x| if x >= 0.7 { 1.0 } else { 0.0 }, 8, 128)
            .unwrap();
        for q in 0..=8 {
            assert!((closed.coeffs[q] - quad.coeffs[q]).abs() < 5e-3, "q={q}");
        }
        // discontinuous observables do not reach the 1e-10 stability target
        assert!(quad.warning.is_some());
    }

    #[test]
    fn parseval_for_indicator_at_zero() {
        let q_max = 40;
        let e = Observable::Indicator { u: 0.0 }.expansion(q_max).unwrap();
        let gap = 0.5 - 0.25 - e.tail_mass;
        // tail Σ_{q>40} a_q² q! from the closed form, summed to 200 plus a bound on the rest
        let far = Observable::Indicator { u: 0.0 }.expansion(200).unwrap();
        let tail: f64 = (q_max + 1..=200).map(|q| far.chaos_weight(q)).sum();
        let rest = 0.5 - 0.25 - far.tail_mass;
        assert!(gap >= 0.0);
        assert!((gap - tail).abs() <= rest.abs() + 1e-14, "gap={gap} tail={tail}");
    }

    #[test]
    fn series_eval_matches_hermite_sum() {
        let a = vec![0.3, -1.0, 0.5, 0.0, 0.25];
        let phi = Observable::Series(a.clone());
        for &x in &[-1.3, 0.0, 0.4, 2.2] {
            let direct: f64 = a.iter().enumerate().map(|(q, c)| c * hermite_eval(q, x).unwrap()).sum();
            assert!((phi.eval(x) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn dropping_first_chaos() {
        let phi = Observable::Indicator { u: 1.0 }.without_chaos(&[1]).unwrap();
        let e = phi.expansion(6).unwrap();
        assert_eq!(e.coeff(1), 0.0);
        assert_eq!(e.rank, crate::hermite::Rank::Finite(2));
        let base = Observable::Indicator { u: 1.0 }.expansion(6).unwrap();
        let m2 = e.second_moment.unwrap();
        assert!((m2 - (base.second_moment.unwrap() - base.chaos_weight(1))).abs() < 1e-14);
        assert!((phi.eval(2.0) - (1.0 - base.coeff(1) * 2.0)).abs() < 1e-14);
    }

    #[test]
    fn parse_specs() {
        assert_eq!(Observable::parse("hermite:3").unwrap().id(), "hermite:3");
        assert_eq!(Observable::parse("indicator:0").unwrap().id(), "indicator:0");
        assert_eq!(Observable::parse("series:1,0,2").unwrap().eval(1.0), 1.0);
        assert!(Observable::parse("hermite:x").is_err());
        assert!(Observable::parse("bogus:1").is_err());
        assert!(Observable::parse("hermite").is_err());
    }

    #[test]
    fn table_observable() {
        let t = Observable::table(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.eval(-5.0), 0.0);
        assert_eq!(t.eval(0.5), 0.5);
        let e = t.expansion(4).unwrap();
        assert!(e.coeff(1).abs() < 1e-9, "even table has no odd chaos");
        assert!(Observable::table(vec![0.0], vec![1.0]).is_err());
    }
}
