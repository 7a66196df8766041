//! Radial moments `∫_{|z| ≤ r} C(z)^q dz` of covariance powers, slope fits in
//! `q`, the truncated weight `w_{r,M}`, and the ball covariogram.
//!
//! Berry covariances oscillate with envelope `A r^{-(d-1)/2}`. Improper
//! moments of such models are split at a zero of `J_{d/2-1}`:
//! * non-negative integrands (`|C|^q`, or even `q`) get an analytic tail from
//!   the envelope mean of `|cos|^q`. At a zero the first-order boundary terms
//!   of every harmonic vanish, so the remainder is `O(R^{-s-1})`;
//! * sign-changing integrands (odd `q`, signed) are summed annulus by annulus
//!   between consecutive zeros and the alternating partial sums are
//!   accelerated with Wynn's epsilon algorithm.

use crate::error::{Error, Result};
use crate::hermite::HermiteExpansion;
use crate::quad::{integrate, Integral, QuadOptions};
use crate::specialfn::{ball_volume, bessel_j_zero, sphere_surface, CovarianceModel, ModelKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

/// Upper radius of a moment integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Radius {
    Finite(f64),
    /// The whole space; admissibility is decided by [`tail_behaviour`].
    Infinite,
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Finite(r) => write!(f, "{r}"),
            Radius::Infinite => f.write_str("inf"),
        }
    }
}

/// A quadrature value with its error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub value: f64,
    pub err: f64,
}

/// How the integrand behaves at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBehaviour {
    /// Faster than any power.
    Rapid,
    /// Monotone power law `r^{-p}`, `p > 1`.
    PowerLaw { p: f64 },
    /// Oscillating with non-negative mean and envelope `r^{-s}`, `s > 1`.
    OscillatingPositive { s: f64 },
    /// Oscillating around zero with envelope `r^{-s}`, `s > 0`.
    Alternating { s: f64 },
}

/// Decides whether the improper moment exists; divergent requests are errors
/// naming the violated criterion.
pub fn tail_behaviour(model: &CovarianceModel, q: usize, signed: bool) -> Result<TailBehaviour> {
    let d = model.d as f64;
    let qf = q as f64;
    match model.kind {
        ModelKind::Exponential { .. } | ModelKind::WhittleMatern { .. } => Ok(TailBehaviour::Rapid),
        ModelKind::Cauchy { beta, .. } => {
            if qf * beta > d {
                Ok(TailBehaviour::PowerLaw { p: qf * beta - d + 1.0 })
            } else {
                Err(Error::Divergence(format!(
                    "moment of C^{q} over R^{} diverges: q*beta = {} <= d (decay condition with delta = beta)",
                    model.d,
                    qf * beta
                )))
            }
        }
        ModelKind::Berry => {
            let delta = (d - 1.0) / 2.0;
            let s = qf * delta - (d - 1.0);
            let sign_changing = signed && q % 2 == 1;
            if sign_changing {
                if s > 0.0 {
                    Ok(TailBehaviour::Alternating { s })
                } else {
                    Err(Error::Divergence(format!(
                        "oscillatory moment of C^{q} over R^{} diverges: envelope exponent q*delta - (d-1) = {s} <= 0",
                        model.d
                    )))
                }
            } else if qf * delta > d {
                Ok(TailBehaviour::OscillatingPositive { s })
            } else {
                Err(Error::Divergence(format!(
                    "absolute moment diverges: q*delta = {} <= d = {} with delta = (d-1)/2 (decay condition usage)",
                    qf * delta,
                    model.d
                )))
            }
        }
    }
}

fn power(c: f64, q: usize, signed: bool) -> f64 {
    let v = c.powi(q as i32);
    if signed {
        v
    } else {
        v.abs()
    }
}

/// Breakpoints on `[0, r_max]`: a geometric ladder at the peak width of
/// `C^q` near 0, then steps at the oscillation/decay scale.
pub(crate) fn breakpoints(model: &CovarianceModel, q: usize, r_max: f64) -> Vec<f64> {
    let d = model.d as f64;
    let alpha = model.local_exponent();
    let width = (2.0 * d / q as f64).powf(1.0 / alpha).min(1.0);
    let mut pts = vec![0.0];
    let mut r = 0.25 * width;
    while r < 4.0 * width && r < r_max {
        pts.push(r);
        r *= 2.0;
    }
    let step = match model.kind {
        ModelKind::Berry => PI / 2.0,
        _ => 1.0,
    };
    let mut r = pts.last().copied().unwrap_or(0.0).max(4.0 * width);
    r = (r / step).ceil() * step;
    while r < r_max {
        pts.push(r);
        r += step;
    }
    pts.push(r_max);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    pts
}

fn opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-15, rel_tol: 1e-11, max_intervals: 50_000 }
}

fn finite_moment(model: &CovarianceModel, q: usize, r_max: f64, signed: bool) -> Integral {
    let dm1 = model.d as i32 - 1;
    let f = |r: f64| power(model.value(r), q, signed) * r.powi(dm1);
    integrate(f, &breakpoints(model, q, r_max), opts())
}

/// `∫_{|z| ≤ r_max} C^q(z) dz` (or `|C|^q` when `signed` is false).
pub fn cov_moment(model: &CovarianceModel, q: usize, r_max: Radius, signed: bool) -> Result<Moment> {
    model.validate()?;
    if q == 0 {
        return Err(Error::Config("moment power q must be >= 1".into()));
    }
    let surface = sphere_surface(model.d);
    let radial = match r_max {
        Radius::Finite(r) => {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::Domain(format!("cutoff radius must be finite and >= 0, got {r}")));
            }
            let i = finite_moment(model, q, r, signed);
            if !i.converged {
                return Err(Error::Accuracy(format!(
                    "moment quadrature for q={q} did not converge (err {:.3e})",
                    i.err
                )));
            }
            Moment { value: i.value, err: i.err }
        }
        Radius::Infinite => improper_moment(model, q, signed)?,
    };
    Ok(Moment { value: surface * radial.value, err: surface * radial.err })
}

fn improper_moment(model: &CovarianceModel, q: usize, signed: bool) -> Result<Moment> {
    let dm1 = model.d as i32 - 1;
    match tail_behaviour(model, q, signed)? {
        TailBehaviour::Rapid => {
            // march out until the integrand is below e^{-60}
            let mut r = 1.0;
            while q as f64 * model.value(r).abs().max(1e-300).ln() + dm1 as f64 * r.ln() > -60.0 {
                r *= 1.5;
            }
            let i = finite_moment(model, q, r, signed);
            Ok(Moment { value: i.value, err: i.err + 1e-26 })
        }
        TailBehaviour::PowerLaw { .. } => {
            let r0 = 10.0;
            let head = finite_moment(model, q, r0, signed);
            // r = r0/u maps (r0, ∞) to (0, 1)
            let f = |u: f64| {
                let r = r0 / u;
                power(model.value(r), q, signed) * r.powi(dm1) * r0 / (u * u)
            };
            let tail = integrate(f, &[0.0, 1e-6, 1e-4, 1e-2, 0.1, 0.5, 1.0], opts());
            if !(head.converged && tail.converged) {
                return Err(Error::Accuracy(format!("power-law moment q={q} did not converge")));
            }
            Ok(Moment { value: head.value + tail.value, err: head.err + tail.err })
        }
        TailBehaviour::OscillatingPositive { s } => {
            let near = berry_positive(model, q, signed, s, 100);
            let far = berry_positive(model, q, signed, s, 200);
            Ok(Moment { value: far.value, err: far.err + (far.value - near.value).abs() })
        }
        TailBehaviour::Alternating { .. } => berry_alternating(model, q),
    }
}

/// Mean of `|cos θ|^q` over a period.
fn mean_abs_cos_power(q: usize) -> f64 {
    let qf = q as f64;
    (libm::lgamma((qf + 1.0) / 2.0) - libm::lgamma(qf / 2.0 + 1.0)).exp() / PI.sqrt()
}

fn berry_positive(model: &CovarianceModel, q: usize, signed: bool, s: f64, zero_index: usize) -> Moment {
    let nu = model.berry_order();
    let env = model.envelope().expect("Berry model has an envelope");
    let big_r = bessel_j_zero(nu, zero_index);
    let head = finite_moment(model, q, big_r, signed);
    let tail = env.amplitude.powi(q as i32) * mean_abs_cos_power(q) * big_r.powf(1.0 - s) / (s - 1.0);
    Moment { value: head.value + tail, err: head.err }
}

fn berry_alternating(model: &CovarianceModel, q: usize) -> Result<Moment> {
    let nu = model.berry_order();
    let dm1 = model.d as i32 - 1;
    let first = 20;
    let count = 40;
    let zeros: Vec<f64> = (first..=first + count).map(|k| bessel_j_zero(nu, k)).collect();
    let head = finite_moment(model, q, zeros[0], true);
    let f = |r: f64| model.value(r).powi(q as i32) * r.powi(dm1);
    let mut partial = Vec::with_capacity(count);
    let mut acc = head.value;
    let mut err = head.err;
    for w in zeros.windows(2) {
        let i = integrate(f, &[w[0], 0.5 * (w[0] + w[1]), w[1]], opts());
        acc += i.value;
        err += i.err;
        partial.push(acc);
    }
    let (value, extrap_err) = wynn_epsilon(&partial);
    Ok(Moment { value, err: err + extrap_err })
}

/// Wynn's epsilon algorithm: limit estimate of a sequence and the change
/// between the last two even-column estimates.
pub fn wynn_epsilon(seq: &[f64]) -> (f64, f64) {
    let n = seq.len();
    if n < 3 {
        return (*seq.last().unwrap_or(&0.0), f64::INFINITY);
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = seq.to_vec();
    let mut best = (seq[n - 1], (seq[n - 1] - seq[n - 2]).abs());
    let mut col = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            let inv = if diff == 0.0 { f64::INFINITY } else { 1.0 / diff };
            next.push(prev[i + 1] + inv);
        }
        col += 1;
        prev = cur;
        cur = next;
        if col % 2 == 0 && cur.len() >= 2 {
            let m = cur.len();
            if cur[m - 1].is_finite() && cur[m - 2].is_finite() {
                let change = (cur[m - 1] - cur[m - 2]).abs();
                if change < best.1 {
                    best = (cur[m - 1], change);
                }
            }
        }
    }
    best
}

/// One row of a [`MomentTable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub q: usize,
    pub r_max: Radius,
    pub value: f64,
    pub err: f64,
    pub signed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub model: CovarianceModel,
    pub d: usize,
    pub entries: Vec<MomentEntry>,
}

impl MomentTable {
    /// Builds the table in parallel over `q`; entry order follows `qs`.
    pub fn build(model: &CovarianceModel, qs: &[usize], r_max: Radius, signed: bool) -> Result<Self> {
        let entries = qs
            .par_iter()
            .map(|&q| {
                cov_moment(model, q, r_max, signed).map(|m| MomentEntry {
                    q,
                    r_max,
                    value: m.value,
                    err: m.err,
                    signed,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MomentTable { model: *model, d: model.d, entries })
    }

    /// CSV with columns `d,model,q,r_max,signed,value,err`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["d", "model", "q", "r_max", "signed", "value", "err"])?;
        for e in &self.entries {
            w.write_record([
                self.d.to_string(),
                self.model.tag(),
                e.q.to_string(),
                e.r_max.to_string(),
                e.signed.to_string(),
                format!("{:e}", e.value),
                format!("{:e}", e.err),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares line through `(log q, log value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub table: MomentTable,
}

/// Unweighted least squares of `log y` on `log x`: (slope, intercept, rms residual).
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Fits `log ∫_{R^d} C^q` against `log q` over `q_lo..=q_hi`; the slope
/// estimates `-d/α`.
pub fn moment_slope(model: &CovarianceModel, q_lo: usize, q_hi: usize, signed: bool) -> Result<SlopeFit> {
    if q_lo == 0 || q_hi <= q_lo {
        return Err(Error::Config(format!("need 1 <= q_lo < q_hi, got {q_lo}..{q_hi}")));
    }
    let qs: Vec<usize> = (q_lo..=q_hi).collect();
    let table = MomentTable::build(model, &qs, Radius::Infinite, signed)?;
    if let Some(bad) = table.entries.iter().find(|e| !(e.value > 0.0)) {
        return Err(Error::Accuracy(format!(
            "non-positive moment {} at q={} cannot enter a log-log fit",
            bad.value, bad.q
        )));
    }
    let xs: Vec<f64> = table.entries.iter().map(|e| e.q as f64).collect();
    let ys: Vec<f64> = table.entries.iter().map(|e| e.value).collect();
    let (slope, intercept, residual) = loglog_fit(&xs, &ys);
    Ok(SlopeFit { slope, intercept, residual, table })
}

/// Large-`q` constant `lim q ∫_{R^2} J_0(|z|)^q dz` under the three usual
/// normalizations of the moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConstant {
    /// `lim q ∫_{R^d} C^q dz`.
    pub plane: f64,
    /// `lim q ∫_0^∞ C(r)^q r^{d-1} dr` (plane divided by the sphere surface).
    pub radial: f64,
    /// Plane value divided by `(2π)^d` (Fourier-normalized measure).
    pub fourier: f64,
}

/// Extrapolates `q·value = c_0 + c_1/q` over table entries with `q ≥ q_min`.
pub fn moment_constant(table: &MomentTable, q_min: usize) -> MomentConstant {
    let pts: Vec<(f64, f64)> = table
        .entries
        .iter()
        .filter(|e| e.q >= q_min)
        .map(|e| (1.0 / e.q as f64, e.q as f64 * e.value))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let plane = my - sxy / sxx * mx;
    let d = table.d;
    MomentConstant {
        plane,
        radial: plane / sphere_surface(d),
        fourier: plane / (2.0 * PI).powi(d as i32),
    }
}

/// Limit classification of `r ↦ w_{r,M}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitFlag {
    Finite,
    Divergent,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSample {
    pub r: Radius,
    pub w: f64,
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCurve {
    pub model: CovarianceModel,
    pub m: usize,
    pub rank: usize,
    pub samples: Vec<WeightSample>,
    pub limit_flag: LimitFlag,
}

/// `w_{r,M} = Σ_{q=R..M} q! a_q² ∫_{|x| ≤ r} C^q(x) dx` on a grid of radii.
pub fn weight_w(
    model: &CovarianceModel,
    expansion: &HermiteExpansion,
    m: usize,
    r_grid: &[Radius],
) -> Result<WeightCurve> {
    let rank = expansion
        .rank
        .finite()
        .ok_or_else(|| Error::Config("observable has no finite Hermite rank below its truncation".into()))?;
    if m < rank {
        return Err(Error::Config(format!("truncation M = {m} is below the Hermite rank R = {rank}")));
    }
    let samples = r_grid
        .par_iter()
        .map(|&r| {
            let mut w = 0.0;
            let mut err = 0.0;
            for q in rank..=m {
                let weight = expansion.chaos_weight(q);
                if weight == 0.0 {
                    continue;
                }
                let mom = cov_moment(model, q, r, true)?;
                w += weight * mom.value;
                err += weight * mom.err;
            }
            Ok(WeightSample { r, w, err })
        })
        .collect::<Result<Vec<_>>>()?;
    let limit_flag = match samples.as_slice() {
        [.., a, b] => {
            let tol = 3.0 * (a.err + b.err) + 1e-3 * b.w.abs();
            if (b.w - a.w).abs() <= tol || b.r == Radius::Infinite {
                LimitFlag::Finite
            } else if b.w.abs() > 1.1 * a.w.abs() {
                LimitFlag::Divergent
            } else {
                LimitFlag::Undetermined
            }
        }
        _ => LimitFlag::Undetermined,
    };
    Ok(WeightCurve { model: *model, m, rank, samples, limit_flag })
}

/// Volume of `B(0, a) ∩ B(z e_1, b)` in `R^d`.
pub fn covariogram(d: usize, a: f64, b: f64, z: f64) -> f64 {
    let z = z.abs();
    if z >= a + b {
        return 0.0;
    }
    if z <= (a - b).abs() {
        return ball_volume(d) * a.min(b).powi(d as i32);
    }
    match d {
        1 => (a.min(z + b) - (-a).max(z - b)).max(0.0),
        2 => {
            let c1 = ((z * z + a * a - b * b) / (2.0 * z * a)).clamp(-1.0, 1.0);
            let c2 = ((z * z + b * b - a * a) / (2.0 * z * b)).clamp(-1.0, 1.0);
            let k = ((-z + a + b) * (z + a - b) * (z - a + b) * (z + a + b)).max(0.0);
            a * a * c1.acos() + b * b * c2.acos() - 0.5 * k.sqrt()
        }
        3 => {
            PI * (a + b - z).powi(2) * (z * z + 2.0 * z * b - 3.0 * b * b + 2.0 * z * a + 6.0 * a * b
                - 3.0 * a * a)
                / (12.0 * z)
        }
        _ => {
            // slices orthogonal to the axis are (d-1)-balls
            let x0 = (z * z + a * a - b * b) / (2.0 * z);
            let vol = ball_volume(d - 1);
            let p = (d - 1) as f64;
            let left = |x: f64| vol * (b * b - (x - z).powi(2)).max(0.0).powf(p / 2.0);
            let right = |x: f64| vol * (a * a - x * x).max(0.0).powf(p / 2.0);
            let o = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 2000 };
            integrate(left, &[z - b, x0], o).value + integrate(right, &[x0, a], o).value
        }
    }
}

/// One row of the weighted-moment diagnostic table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSumRow {
    pub q_max: usize,
    pub sum: f64,
}

/// `Σ_{q=R..Q} q^{d/α} a_q² q! ∫_{R^d} |C|^q` for each `Q` in `q_maxes`.
pub fn derivative_sum_table(
    model: &CovarianceModel,
    expansion: &HermiteExpansion,
    q_maxes: &[usize],
) -> Result<Vec<DerivativeSumRow>> {
    let rank = expansion
        .rank
        .finite()
        .ok_or_else(|| Error::Config("observable has no finite Hermite rank".into()))?;
    let top = q_maxes.iter().copied().max().unwrap_or(rank);
    if top > expansion.order() {
        return Err(Error::Config(format!(
            "expansion order {} is below the requested Q = {top}",
            expansion.order()
        )));
    }
    let exponent = model.d as f64 / model.local_exponent();
    let terms = (rank..=top)
        .into_par_iter()
        .map(|q| {
            let w = expansion.chaos_weight(q);
            if w == 0.0 {
                return Ok(0.0);
            }
            let m = cov_moment(model, q, Radius::Infinite, false)?;
            Ok((q as f64).powf(exponent) * w * m.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(q_maxes
        .iter()
        .map(|&qm| DerivativeSumRow { q_max: qm, sum: terms[..=(qm - rank)].iter().sum() })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::Observable;

    #[test]
    fn exponential_moments_are_two_over_q() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        for q in [1, 2, 3, 7, 16, 64] {
            let v = cov_moment(&m, q, Radius::Infinite, true).unwrap();
            assert!((v.value - 2.0 / q as f64).abs() < 1e-10, "q={q}: {v:?}");
        }
    }

    #[test]
    fn berry_divergence_is_typed() {
        let m = CovarianceModel::berry(2).unwrap();
        for q in 1..=4 {
            let e = cov_moment(&m, q, Radius::Infinite, false).unwrap_err();
            assert!(matches!(e, Error::Divergence(_)), "{e}");
        }
        assert!(cov_moment(&m, 1, Radius::Infinite, true).is_err());
        assert!(cov_moment(&m, 5, Radius::Infinite, false).is_ok());
        let c = CovarianceModel::cauchy(0.3, 2.0, 1).unwrap();
        assert!(matches!(
            cov_moment(&c, 3, Radius::Infinite, false),
            Err(Error::Divergence(_))
        ));
        assert!(cov_moment(&c, 4, Radius::Infinite, false).is_ok());
    }

    #[test]
    fn berry_three_closed_form_q4() {
        // ∫_0^∞ (sin r / r)^4 r^2 dr = π/4
        let m = CovarianceModel::berry(3).unwrap();
        let v = cov_moment(&m, 4, Radius::Infinite, true).unwrap();
        assert!((v.value - 4.0 * PI * PI / 4.0).abs() < 1e-7, "{v:?}");
        // ∫_0^∞ (sin r / r)^3 r^2 dr = log(3)/4 + ... by direct quadrature oracle
        let v3 = cov_moment(&m, 3, Radius::Infinite, true).unwrap();
        let direct = integrate(
            |r: f64| if r == 0.0 { 0.0 } else { r.sin().powi(3) / r },
            &crate::quad::uniform_breaks(0.0, 4000.0 * PI, PI),
            QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 100_000 },
        );
        // the truncated oracle has an O(1/R) oscillating remainder; the exact value is π/4
        assert!((v3.value / (4.0 * PI) - PI / 4.0).abs() < 1e-7, "{} {}", v3.value, direct.value);
    }

    #[test]
    fn berry_log_growth_q4() {
        // J_0^4 r ~ (2/π)^2 (3/8) / r on average, so each doubling adds (3/π) log 2
        let m = CovarianceModel::berry(2).unwrap();
        let v200 = cov_moment(&m, 4, Radius::Finite(bessel_j_zero(0.0, 64)), true).unwrap().value;
        let v400 = cov_moment(&m, 4, Radius::Finite(bessel_j_zero(0.0, 128)), true).unwrap().value;
        let expect = 3.0 / PI * 2f64.ln();
        assert!((v400 - v200 - expect).abs() < 2e-3, "{} vs {expect}", v400 - v200);
    }

    #[test]
    fn berry_q8_positive_finite_and_consistent_with_annulus_oracle() {
        let m = CovarianceModel::berry(2).unwrap();
        let v = cov_moment(&m, 8, Radius::Infinite, true).unwrap();
        assert!(v.value > 0.0 && v.value.is_finite());
        // oracle: annulus partial sums to a far zero, Richardson in R^{-2}
        let nu = 0.0;
        let r1 = bessel_j_zero(nu, 300);
        let r2 = bessel_j_zero(nu, 600);
        let s1 = 2.0 * PI * finite_moment(&m, 8, r1, true).value;
        let s2 = 2.0 * PI * finite_moment(&m, 8, r2, true).value;
        // tail ~ c R^{-2}
        let rich = (s2 * r2 * r2 - s1 * r1 * r1) / (r2 * r2 - r1 * r1);
        assert!((v.value - rich).abs() < 1e-8, "{} vs {}", v.value, rich);
    }

    #[test]
    fn moment_consistency_abs_vs_signed() {
        let m = CovarianceModel::berry(2).unwrap();
        for q in [5, 7, 9] {
            for r in [Radius::Finite(30.0), Radius::Infinite] {
                let a = cov_moment(&m, q, r, false).unwrap();
                let s = cov_moment(&m, q, r, true).unwrap();
                assert!(a.value + a.err + s.err >= s.value.abs(), "q={q}");
            }
        }
    }

    #[test]
    fn even_absolute_equals_signed_and_monotone() {
        let m = CovarianceModel::berry(3).unwrap();
        let mut last = 0.0;
        for r in [1.0, 5.0, 10.0, 40.0] {
            let a = cov_moment(&m, 4, Radius::Finite(r), false).unwrap().value;
            let s = cov_moment(&m, 4, Radius::Finite(r), true).unwrap().value;
            assert!((a - s).abs() < 1e-12);
            assert!(a >= last);
            last = a;
        }
    }

    #[test]
    fn exponential_slope_exact() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let fit = moment_slope(&m, 2, 64, true).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-6, "{}", fit.slope);
        assert!((fit.intercept - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // log 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let seq: Vec<f64> = (1..=20)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        let (v, e) = wynn_epsilon(&seq);
        assert!((v - 2f64.ln()).abs() < 1e-10, "{v} {e}");
    }

    #[test]
    fn covariogram_examples() {
        assert!((covariogram(1, 1.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(covariogram(2, 1.0, 1.0, 2.0), 0.0);
        let lens = 2.0 * 0.5f64.acos() - 0.5 * 3f64.sqrt();
        assert!((covariogram(2, 1.0, 1.0, 1.0) - lens).abs() < 1e-13);
        assert!((lens - 1.228_370).abs() < 1e-6);
        // the slice quadrature reproduces the closed forms
        for &(a, b, z) in &[(1.0, 1.0, 0.5), (2.0, 1.0, 1.7), (1.0, 1.5, 2.0)] {
            for d in [2usize, 3] {
                let closed = covariogram(d, a, b, z);
                let x0 = (z * z + a * a - b * b) / (2.0 * z);
                let p = (d - 1) as f64;
                let vol = ball_volume(d - 1);
                let o = QuadOptions::default();
                let sliced = integrate(|x| vol * (b * b - (x - z) * (x - z)).max(0.0).powf(p / 2.0), &[z - b, x0], o).value
                    + integrate(|x| vol * (a * a - x * x).max(0.0).powf(p / 2.0), &[x0, a], o).value;
                assert!((closed - sliced).abs() < 1e-9, "d={d} {closed} {sliced}");
            }
        }
    }

    #[test]
    fn covariogram_properties_on_grid() {
        for d in 1..=5 {
            for &(a, b) in &[(1.0, 1.0), (2.0, 0.7), (0.5, 1.5)] {
                let lip = ball_volume(d - 1).max(1.0) * f64::min(a, b).powi(d as i32 - 1);
                let mut prev = covariogram(d, a, b, 0.0);
                for i in 1..=400 {
                    let z = (a + b) * 1.2 * i as f64 / 400.0;
                    let g = covariogram(d, a, b, z);
                    assert!((g - covariogram(d, b, a, z)).abs() < 1e-10);
                    assert!(g <= prev + 1e-12, "nonincreasing d={d}");
                    let dz = (a + b) * 1.2 / 400.0;
                    assert!((prev - g).abs() <= lip * dz * (1.0 + 1e-6) + 1e-12, "Lipschitz d={d}");
                    if z >= a + b {
                        assert_eq!(g, 0.0);
                    }
                    prev = g;
                }
            }
        }
    }

    #[test]
    fn weight_single_term_and_closed_form() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let e = Observable::Hermite(2).expansion(4).unwrap();
        let c = weight_w(&m, &e, 2, &[Radius::Infinite]).unwrap();
        assert!((c.samples[0].w - 2.0).abs() < 1e-10);
        assert!(weight_w(&m, &e, 1, &[Radius::Infinite]).is_err());
        let ind = Observable::Indicator { u: 1.0 }.expansion(8).unwrap();
        let single = weight_w(&m, &ind, 1, &[Radius::Finite(3.0)]).unwrap();
        let direct = ind.chaos_weight(1) * cov_moment(&m, 1, Radius::Finite(3.0), true).unwrap().value;
        assert!((single.samples[0].w - direct).abs() <= single.samples[0].err + 1e-14);
    }

    #[test]
    fn csv_columns() {
        let m = CovarianceModel::exponential(1.0, 1).unwrap();
        let t = MomentTable::build(&m, &[1, 2], Radius::Infinite, true).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("d,model,q,r_max,signed,value,err\n"));
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(&rows[0][1], "exponential(alpha=1,d=1)");
        assert_eq!(&rows[1][3], "inf");
        assert!((rows[1][5].parse::<f64>().unwrap() - 1.0).abs() < 1e-10);
    }
}
