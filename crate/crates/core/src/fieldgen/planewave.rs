use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    /// Angles `πk/K` on the half circle (d = 2 only).
    Deterministic,
    /// Independent uniform directions on the sphere.
    RandomSphere,
}

/// `B(x) = K^{-1/2} Σ_k [a_k cos(ξ_k·x) + b_k sin(ξ_k·x)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveBasis {
    pub d: usize,
    pub k: usize,
    /// Row-major `k × d` unit vectors.
    pub directions: Vec<f64>,
    pub amps_cos: Vec<f64>,
    pub amps_sin: Vec<f64>,
    pub seed: u64,
    pub mode: DirectionMode,
}

pub fn make_planewave(d: usize, k: usize, mode: DirectionMode, seed: u64) -> Result<PlaneWaveBasis> {
    if d == 0 {
        return Err(Error::Config("dimension must be >= 1".into()));
    }
    if k == 0 {
        return Err(Error::Config("plane-wave count K must be >= 1".into()));
    }
    let directions = match mode {
        DirectionMode::Deterministic => {
            if d != 2 {
                return Err(Error::Config(format!(
                    "deterministic directions are defined for d = 2 only, got d = {d}"
                )));
            }
            (0..k)
                .flat_map(|i| {
                    let th = PI * i as f64 / k as f64;
                    [th.cos(), th.sin()]
                })
                .collect()
        }
        DirectionMode::RandomSphere => {
            let mut rng = stream(seed, Purpose::Directions, 0);
            let mut dirs = Vec::with_capacity(k * d);
            for _ in 0..k {
                loop {
                    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n > 1e-12 {
                        dirs.extend(v.iter().map(|x| x / n));
                        break;
                    }
                }
            }
            dirs
        }
    };
    let mut rng = stream(seed, Purpose::Amplitudes, 0);
    let amps_cos = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let amps_sin = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    Ok(PlaneWaveBasis { d, k, directions, amps_cos, amps_sin, seed, mode })
}

impl PlaneWaveBasis {
    /// Basis with explicit directions and amplitudes.
    pub fn from_parts(d: usize, directions: Vec<f64>, amps_cos: Vec<f64>, amps_sin: Vec<f64>) -> Result<Self> {
        let k = amps_cos.len();
        if k == 0 || amps_sin.len() != k || directions.len() != k * d {
            return Err(Error::Config("inconsistent plane-wave parts".into()));
        }
        Ok(PlaneWaveBasis { d, k, directions, amps_cos, amps_sin, seed: 0, mode: DirectionMode::RandomSphere })
    }

    /// Same directions with all amplitudes zero. Test hook.
    pub fn zeroed(mut self) -> Self {
        self.amps_cos.iter_mut().for_each(|a| *a = 0.0);
        self.amps_sin.iter_mut().for_each(|a| *a = 0.0);
        self
    }

    /// Same directions, amplitudes redrawn from `seed`.
    pub fn redraw(&self, seed: u64) -> Self {
        let mut rng = stream(seed, Purpose::Amplitudes, 0);
        let amps_cos = (0..self.k).map(|_| rng.sample(StandardNormal)).collect();
        let amps_sin = (0..self.k).map(|_| rng.sample(StandardNormal)).collect();
        PlaneWaveBasis { amps_cos, amps_sin, seed, directions: self.directions.clone(), ..*self }
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.directions[i * self.d..(i + 1) * self.d]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.k {
            let phase: f64 = self.direction(i).iter().zip(x).map(|(a, b)| a * b).sum();
            let (sn, cs) = phase.sin_cos();
            s += self.amps_cos[i] * cs + self.amps_sin[i] * sn;
        }
        s / (self.k as f64).sqrt()
    }

    /// Conditional covariance `(1/K) Σ_k cos(ξ_k·z)`.
    pub fn covariance(&self, z: &[f64]) -> f64 {
        let s: f64 = (0..self.k)
            .map(|i| self.direction(i).iter().zip(z).map(|(a, b)| a * b).sum::<f64>().cos())
            .sum();
        s / self.k as f64
    }
}

pub fn eval_field(basis: &PlaneWaveBasis, points: &[Vec<f64>]) -> Vec<f64> {
    points.iter().map(|p| basis.eval(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specialfn::bessel_j;

    #[test]
    fn deterministic_and_reproducible() {
        let a = make_planewave(2, 256, DirectionMode::Deterministic, 11).unwrap();
        let b = make_planewave(2, 256, DirectionMode::Deterministic, 11).unwrap();
        assert_eq!(a, b);
        assert!(make_planewave(3, 16, DirectionMode::Deterministic, 1).is_err());
        for i in 0..a.k {
            let n: f64 = a.direction(i).iter().map(|x| x * x).sum();
            assert!((n.sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_covariance_matches_j0() {
        let b = make_planewave(2, 256, DirectionMode::Deterministic, 0).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=100 {
            for ang in [0.0, 0.3, 1.1] {
                let r = 10.0 * i as f64 / 100.0;
                let z = [r * f64::cos(ang), r * f64::sin(ang)];
                worst = worst.max((b.covariance(&z) - bessel_j(0.0, r).unwrap()).abs());
            }
        }
        assert!(worst < 1e-3, "{worst}");
        assert_eq!(b.covariance(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn random_sphere_directions_are_centered() {
        let b = make_planewave(3, 100_000, DirectionMode::RandomSphere, 5).unwrap();
        for j in 0..3 {
            let mean: f64 = (0..b.k).map(|i| b.direction(i)[j]).sum::<f64>() / b.k as f64;
            // each coordinate has variance 1/3
            assert!(mean.abs() < 3.0 * (1.0 / 3.0f64 / b.k as f64).sqrt(), "{mean}");
        }
    }

    #[test]
    fn eval_hooks() {
        let b = make_planewave(2, 32, DirectionMode::Deterministic, 3).unwrap().zeroed();
        assert!(eval_field(&b, &[vec![0.3, 1.0], vec![5.0, -2.0]]).iter().all(|&v| v == 0.0));
        let one = PlaneWaveBasis::from_parts(2, vec![1.0, 0.0], vec![1.0], vec![0.0]).unwrap();
        assert_eq!(one.eval(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn unit_variance_at_a_point() {
        let base = make_planewave(2, 64, DirectionMode::Deterministic, 0).unwrap();
        let n = 10_000;
        let x = [1.3, -0.4];
        let v: f64 = (0..n).map(|i| base.redraw(i as u64).eval(&x).powi(2)).sum::<f64>() / n as f64;
        assert!((v - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{v}");
    }
}
