//! Bessel functions of the first kind `J_ν` (real order `ν ≥ 0`) and the
//! modified function of the second kind `K_ν` used by the Whittle–Matérn model.
//!
//! Branches for `J_ν(r)`:
//! * `r ≤ 2`: power series (terms decrease monotonically).
//! * `2 < r ≤ 20`: Miller backward recurrence normalized by the Neumann sum
//!   `(r/2)^μ = Σ_k (μ+2k) Γ(μ+k)/k! J_{μ+2k}(r)`.
//! * `r > 20` (and `r > 2ν²`): Hankel asymptotic expansion summed to its
//!   smallest term, which at `r = 20` is below `1e-17`.

use crate::error::{Error, Result};
use libm::{lgamma as ln_gamma, tgamma as gamma};
use std::f64::consts::PI;

/// Crossover between the recurrence and the asymptotic branch.
pub const ASYMPTOTIC_CROSSOVER: f64 = 20.0;
const SERIES_LIMIT: f64 = 2.0;

/// `J_ν(r)` for `ν ≥ 0`, `r ≥ 0`.
pub fn bessel_j(nu: f64, r: f64) -> Result<f64> {
    if !nu.is_finite() || !r.is_finite() {
        return Err(Error::Domain(format!("bessel_j needs finite input, got nu={nu}, r={r}")));
    }
    if nu < 0.0 {
        return Err(Error::Domain(format!("bessel_j order must be >= 0, got {nu}")));
    }
    if r < 0.0 {
        return Err(Error::Domain(format!("bessel_j argument must be >= 0, got {r}")));
    }
    Ok(bessel_j_unchecked(nu, r))
}

pub(crate) fn bessel_j_unchecked(nu: f64, r: f64) -> f64 {
    if r == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if r <= SERIES_LIMIT {
        let prefactor = if nu == 0.0 {
            1.0
        } else {
            (nu * (0.5 * r).ln() - ln_gamma(nu + 1.0)).exp()
        };
        return prefactor * normalized_series(nu, r);
    }
    if r > ASYMPTOTIC_CROSSOVER && r > 2.0 * nu * nu {
        return hankel_asymptotic(nu, r);
    }
    miller(nu, r)
}

/// `Γ(ν+1) (2/r)^ν J_ν(r) = Σ_k (-r²/4)^k / (k! (ν+1)_k)`; equals 1 at `r = 0`.
pub(crate) fn normalized_series(nu: f64, r: f64) -> f64 {
    let z = -0.25 * r * r;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= z / (kf * (nu + kf));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn miller(nu: f64, r: f64) -> f64 {
    let n_int = nu.floor() as usize;
    let mu = nu - n_int as f64;
    let mut top = (nu.max(r) + 40.0 + 2.0 * r.sqrt()).ceil() as usize;
    if top % 2 == 1 {
        top += 1;
    }
    // walk orders mu+top .. mu, accumulate the Neumann normalization over even k
    let mut j_next = 0.0; // J_{mu+k+1}
    let mut j_cur = 1e-300; // J_{mu+k}
    let mut wanted = 0.0;
    let mut norm = 0.0;
    let neumann_coeff = |k: usize| -> f64 {
        // (mu + 2m) Γ(mu+m)/m! with k = 2m
        let m = k / 2;
        if mu == 0.0 {
            if m == 0 {
                1.0
            } else {
                2.0
            }
        } else {
            (mu + k as f64) * (ln_gamma(mu + m as f64) - ln_gamma(m as f64 + 1.0)).exp()
        }
    };
    let mut k = top;
    loop {
        if k == n_int {
            wanted = j_cur;
        }
        if k % 2 == 0 {
            norm += neumann_coeff(k) * j_cur;
        }
        if k == 0 {
            break;
        }
        let order = mu + k as f64;
        let j_prev = 2.0 * order / r * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        k -= 1;
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            wanted *= 1e-250;
            norm *= 1e-250;
        }
    }
    let target = if mu == 0.0 { 1.0 } else { (mu * (0.5 * r).ln()).exp() };
    wanted * target / norm
}

fn hankel_asymptotic(nu: f64, r: f64) -> f64 {
    let four_nu2 = 4.0 * nu * nu;
    let inv8r = 1.0 / (8.0 * r);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0; // a_k / (8r)^k
    let mut last = f64::INFINITY;
    for k in 1..120 {
        let odd = (2 * k - 1) as f64;
        a *= (four_nu2 - odd * odd) * inv8r / k as f64;
        if a.abs() > last {
            break;
        }
        last = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-18 {
            break;
        }
    }
    let chi = r - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * r)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// The `k`-th positive zero (k ≥ 1) of `J_ν`, by McMahon's expansion refined
/// with a safeguarded secant iteration.
pub fn bessel_j_zero(nu: f64, k: usize) -> f64 {
    assert!(k >= 1);
    let beta = (k as f64 + 0.5 * nu - 0.25) * PI;
    let m = 4.0 * nu * nu;
    let b8 = 8.0 * beta;
    let guess = beta - (m - 1.0) / b8 - 4.0 * (m - 1.0) * (7.0 * m - 31.0) / (3.0 * b8.powi(3));
    // bracket around the guess; zeros are separated by about π
    let f = |x: f64| bessel_j_unchecked(nu, x);
    let mut lo = (guess - 0.6).max(1e-6);
    let mut hi = guess + 0.6;
    if f(lo) * f(hi) > 0.0 {
        // fall back to scanning for the sign change nearest the guess
        let mut x = (guess - 1.5).max(1e-6);
        let step = 0.05;
        let mut fx = f(x);
        while x < guess + 1.5 {
            let fn_ = f(x + step);
            if fx * fn_ <= 0.0 {
                lo = x;
                hi = x + step;
                break;
            }
            x += step;
            fx = fn_;
        }
    }
    let (mut flo, mut fhi) = (f(lo), f(hi));
    for _ in 0..100 {
        let mut x = hi - fhi * (hi - lo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 || (hi - lo) < 1e-15 * hi {
            return x;
        }
        if fx * flo < 0.0 {
            hi = x;
            fhi = fx;
        } else {
            lo = x;
            flo = fx;
        }
        // bisection step keeps the bracket shrinking geometrically
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm * flo < 0.0 {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

/// Modified Bessel function `K_ν(x)`, `x > 0`, from the integral
/// `∫_0^∞ exp(-x cosh t) cosh(ν t) dt` by the trapezoid rule, which converges
/// geometrically in the step for this analytic, doubly-exponentially decaying
/// integrand.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() || !nu.is_finite() {
        return Err(Error::Domain(format!("bessel_k needs x > 0 finite, got nu={nu}, x={x}")));
    }
    Ok(bessel_k_scaled(nu.abs(), x) * (-x).exp())
}

/// `e^x K_ν(x)`.
pub(crate) fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    let h = 0.125;
    let mut sum = 0.5;
    let mut i = 1;
    loop {
        let t = i as f64 * h;
        let term = (-x * (t.cosh() - 1.0) + nu * t).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
        sum += term;
        if term < 1e-18 * sum && x * (t.cosh() - 1.0) > nu * t + 40.0 {
            break;
        }
        i += 1;
        if i > 100_000 {
            break;
        }
    }
    sum * h
}

/// Surface area of the unit sphere `S^{d-1}` (2 for d = 1).
pub fn sphere_surface(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    PI.powf(half) / gamma(half + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_oracle(nu: f64, r: f64) -> f64 {
        // long-double-free brute force: sum enough series terms in two halves
        // to limit cancellation for moderate r
        let mut sum = 0.0;
        let mut k = 0.0;
        let mut term = (0.5 * r).powf(nu) / gamma(nu + 1.0);
        while k < 300.0 {
            sum += term;
            k += 1.0;
            term *= -0.25 * r * r / (k * (nu + k));
        }
        sum
    }

    #[test]
    fn half_order_closed_form() {
        for &r in &[0.3, 1.0, 2.5, 7.0, 15.0, 19.9, 20.1, 35.0, 50.0, 400.0] {
            let expect = (2.0 / (PI * r)).sqrt() * r.sin();
            let got = bessel_j(0.5, r).unwrap();
            assert!((got - expect).abs() < 1e-12, "r={r} got={got} expect={expect}");
            let expect32 = (2.0 / (PI * r)).sqrt() * (r.sin() / r - r.cos());
            let got32 = bessel_j(1.5, r).unwrap();
            assert!((got32 - expect32).abs() < 1e-12, "r={r}");
        }
    }

    #[test]
    fn branches_agree_with_series_oracle() {
        for &nu in &[0.0, 1.0, 2.0, 0.5, 3.5] {
            for i in 1..60 {
                let r = 0.2 * i as f64;
                let o = series_oracle(nu, r);
                let got = bessel_j(nu, r).unwrap();
                assert!((got - o).abs() < 1e-11, "nu={nu} r={r} got={got} oracle={o}");
            }
        }
    }

    #[test]
    fn continuity_at_crossover() {
        for &nu in &[0.0, 0.5, 1.0, 2.0] {
            let a = miller(nu, 20.0);
            let b = hankel_asymptotic(nu, 20.0);
            assert!((a - b).abs() < 1e-13, "nu={nu}: {a} vs {b}");
            let a = miller(nu, 2.0);
            let b = bessel_j_unchecked(nu, 2.0);
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn known_values() {
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
        assert!((bessel_j(0.0, 1.0).unwrap() - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j(1.0, 10.0).unwrap() - 0.043_472_746_168_861_44).abs() < 1e-13);
        assert!((bessel_j(0.0, 100.0).unwrap() - 0.019_985_850_304_223_122).abs() < 1e-13);
    }

    #[test]
    fn zeros() {
        assert!((bessel_j_zero(0.0, 1) - 2.404_825_557_695_773).abs() < 1e-12);
        assert!((bessel_j_zero(0.0, 2) - 5.520_078_110_286_311).abs() < 1e-12);
        assert!((bessel_j_zero(0.5, 3) - 3.0 * PI).abs() < 1e-11);
        assert!((bessel_j_zero(1.0, 1) - 3.831_705_970_207_512).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_j(0.0, -1.0).is_err());
        assert!(bessel_j(0.0, f64::NAN).is_err());
        assert!(bessel_j(-1.0, 1.0).is_err());
        assert!(bessel_k(0.5, 0.0).is_err());
    }

    #[test]
    fn k_half_closed_form() {
        for &x in &[1e-3, 0.1, 1.0, 5.0, 30.0] {
            let e = (PI / (2.0 * x)).sqrt() * (-x).exp();
            let g = bessel_k(0.5, x).unwrap();
            assert!(((g - e) / e).abs() < 1e-12, "x={x}: {g} vs {e}");
        }
        // K_1(1) reference value
        assert!((bessel_k(1.0, 1.0).unwrap() - 0.601_907_230_197_234_6).abs() < 1e-13);
    }

    #[test]
    fn geometry_constants() {
        assert!((sphere_surface(1) - 2.0).abs() < 1e-14);
        assert!((sphere_surface(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_surface(3) - 4.0 * PI).abs() < 1e-13);
        assert!((ball_volume(3) - 4.0 / 3.0 * PI).abs() < 1e-13);
    }
}
