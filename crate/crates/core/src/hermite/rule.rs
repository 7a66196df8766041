use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss–Hermite rule for the standard Gaussian weight
/// `e^{-x²/2}/√(2π)`: `Σ w_i f(x_i) ≈ E[f(Z)]`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes start as eigenvalues of the Jacobi matrix of the probabilists'
    /// recurrence (off-diagonal `√k`), are polished by Newton on the
    /// orthonormal Hermite polynomials (rescaled on the fly so large rules
    /// neither overflow nor underflow), and weights come from the derivative at the node.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut diag = vec![0.0; n];
        let mut off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).chain([0.0]).collect();
        tridiagonal_eigenvalues(&mut diag, &mut off);
        diag.sort_by(f64::total_cmp);
        let nf = n as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for &start in &diag {
            let mut x = start;
            let mut log_deriv = 0.0;
            for _ in 0..8 {
                // h_k orthonormal for the Gaussian weight, kept as p·e^{log_scale}
                let (mut p0, mut p1, mut log_scale) = (0.0f64, 1.0f64, -0.25 * x * x);
                for k in 0..n - 1 {
                    let kf = k as f64;
                    let p2 = (x * p1 - kf.sqrt() * p0) / (kf + 1.0).sqrt();
                    p0 = p1;
                    p1 = p2;
                    if p1.abs() > 1e150 {
                        p0 *= 1e-150;
                        p1 *= 1e-150;
                        log_scale += 150.0 * std::f64::consts::LN_10;
                    }
                }
                // p1 ~ h_{n-1}, p0 ~ h_{n-2}; h_n' = √n h_{n-1}
                let pn = (x * p1 - (nf - 1.0).sqrt() * p0) / nf.sqrt();
                let deriv = nf.sqrt() * p1;
                log_deriv = deriv.abs().ln() + log_scale;
                let dx = pn / deriv;
                x -= dx;
                if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                    break;
                }
            }
            nodes.push(x);
            // w = e^{-x²/2} / (n h_{n-1}(x)²) for the normalized Gaussian weight
            weights.push((-0.5 * x * x - 2.0 * log_deriv).exp());
        }
        GaussHermite { nodes, weights }
    }

    /// Process-wide cache of rules by size.
    pub fn cached(n: usize) -> Arc<GaussHermite> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(r) = cache.lock().expect("rule cache poisoned").get(&n) {
            return r.clone();
        }
        let rule = Arc::new(GaussHermite::new(n));
        cache.lock().expect("rule cache poisoned").insert(n, rule.clone());
        rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL; `off[i]`
/// couples rows `i` and `i+1`, `off[n-1]` must be 0. Results land in `diag`.
fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) {
    let n = diag.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::hermite_normalized;

    #[test]
    fn small_rules_match_known_nodes() {
        let r = GaussHermite::new(2);
        assert!((r.nodes[1] - 1.0).abs() < 1e-15 && (r.weights[0] - 0.5).abs() < 1e-15);
        let r = GaussHermite::new(3);
        assert!((r.nodes[2] - 3f64.sqrt()).abs() < 1e-14);
        assert!((r.weights[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn moments_of_standard_gaussian() {
        let r = GaussHermite::new(20);
        assert!((r.expectation(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((r.expectation(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((r.expectation(|x| x.powi(4)) - 3.0).abs() < 1e-12);
        assert!((r.expectation(|x| x.powi(6)) - 15.0).abs() < 1e-11);
    }

    #[test]
    fn orthonormality_at_128_nodes() {
        let r = GaussHermite::cached(128);
        let mut gram = vec![[0.0f64; 21]; 21];
        for (&x, &w) in r.nodes.iter().zip(&r.weights) {
            let h = hermite_normalized(x, 20);
            for p in 0..=20 {
                for q in 0..=20 {
                    gram[p][q] += w * h[p] * h[q];
                }
            }
        }
        for p in 0..=20 {
            for q in 0..=20 {
                let e = if p == q { 1.0 } else { 0.0 };
                assert!((gram[p][q] - e).abs() < 1e-8, "p={p} q={q}: {}", gram[p][q]);
            }
        }
    }

    #[test]
    fn large_rules_stay_normalized() {
        for n in [256, 1024, 2048] {
            let r = GaussHermite::cached(n);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12, "n={n}");
            assert!(r.nodes.windows(2).all(|w| w[1] > w[0]));
        }
    }
}
