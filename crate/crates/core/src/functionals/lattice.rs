use super::{DomainSpec, Shape};
use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};

/// Area of `[x0, x1] × [y0, y1] ∩ {x² + y² ≤ r²}`.
pub fn rect_disk_area(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    // signed primitive over [0, x] × [0, y]
    fn quadrant(x: f64, y: f64, r: f64) -> f64 {
        let s = x.signum() * y.signum();
        let (x, y) = (x.abs().min(r), y.abs().min(r));
        if x == 0.0 || y == 0.0 {
            return 0.0;
        }
        let p = |u: f64| 0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).clamp(-1.0, 1.0).asin());
        let u_star = (r * r - y * y).max(0.0).sqrt();
        let area = if x <= u_star { x * y } else { y * u_star + p(x) - p(u_star) };
        s * area
    }
    quadrant(x1, y1, r) - quadrant(x0, y1, r) - quadrant(x1, y0, r) + quadrant(x0, y0, r)
}

fn ball_cell_fraction(lo: &[f64], h: f64, r: f64) -> f64 {
    let d = lo.len();
    let near2: f64 = lo.iter().map(|&a| if a > 0.0 { a * a } else if a + h < 0.0 { (a + h).powi(2) } else { 0.0 }).sum();
    if near2 >= r * r {
        return 0.0;
    }
    let far2: f64 = lo.iter().map(|&a| a.abs().max((a + h).abs()).powi(2)).sum();
    if far2 <= r * r {
        return 1.0;
    }
    match d {
        1 => ((lo[0] + h).min(r) - lo[0].max(-r)).max(0.0) / h,
        2 => rect_disk_area(lo[0], lo[0] + h, lo[1], lo[1] + h, r) / (h * h),
        3 => {
            let slice = |z: f64| {
                let rz2 = r * r - z * z;
                if rz2 <= 0.0 {
                    0.0
                } else {
                    rect_disk_area(lo[0], lo[0] + h, lo[1], lo[1] + h, rz2.sqrt())
                }
            };
            let (z0, z1) = (lo[2].max(-r), (lo[2] + h).min(r));
            if z1 <= z0 {
                return 0.0;
            }
            let o = QuadOptions { abs_tol: 1e-13 * h * h * h, rel_tol: 1e-10, max_intervals: 200 };
            integrate(slice, &[z0, z1], o).value / (h * h * h)
        }
        _ => {
            // 4 sub-points per axis
            let n = 4usize.pow(d as u32);
            let mut inside = 0usize;
            for k in 0..n {
                let mut rem = k;
                let mut s = 0.0;
                for &a in lo {
                    let x = a + h * ((rem % 4) as f64 + 0.5) / 4.0;
                    rem /= 4;
                    s += x * x;
                }
                if s <= r * r {
                    inside += 1;
                }
            }
            inside as f64 / n as f64
        }
    }
}

fn box_cell_fraction(lo: &[f64], h: f64, half: f64) -> f64 {
    lo.iter().map(|&a| ((a + h).min(half) - a.max(-half)).max(0.0) / h).product()
}

/// Cell-centred lattice `h(i + 1/2)` restricted to `tD`, with each cell
/// weighted by `h^d` times the fraction of the cell inside `tD`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub d: usize,
    pub h: f64,
    /// Row-major `n × d` cell centres.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub domain: DomainSpec,
}

impl Lattice {
    pub fn new(domain: &DomainSpec, h: f64) -> Result<Self> {
        domain.validate()?;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Resolution(format!("grid spacing must be positive, got {h}")));
        }
        let reach = domain.reach();
        if h > 2.0 * reach {
            return Err(Error::Resolution(format!(
                "grid spacing h = {h} exceeds the domain diameter {}",
                2.0 * reach
            )));
        }
        let d = domain.d;
        let m = (reach / h).ceil() as i64;
        let side = (2 * m) as usize;
        let total = side.checked_pow(d as u32).ok_or_else(|| Error::Resolution("lattice too large".into()))?;
        let cell = h.powi(d as i32);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut lo = vec![0.0; d];
        for k in 0..total {
            let mut rem = k;
            for j in (0..d).rev() {
                let i = (rem % side) as i64 - m;
                rem /= side;
                lo[j] = h * i as f64;
            }
            let frac = match domain.shape {
                Shape::Ball => ball_cell_fraction(&lo, h, domain.t),
                Shape::Box => box_cell_fraction(&lo, h, 0.5 * domain.t),
            };
            if frac > 0.0 {
                points.extend(lo.iter().map(|a| a + 0.5 * h));
                weights.push(frac * cell);
            }
        }
        if weights.is_empty() {
            return Err(Error::Resolution("lattice has no cell inside the domain".into()));
        }
        Ok(Lattice { d, h, points, weights, domain: *domain })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// `Σ_i w_i`, the lattice approximation of `vol(tD)`.
    pub fn total_weight(&self) -> f64 {
        crate::quad::pairwise_sum(&self.weights)
    }
}

/// Surface area of `tD`.
pub fn surface_area(domain: &DomainSpec) -> f64 {
    let d = domain.d;
    match domain.shape {
        Shape::Ball => crate::specialfn::sphere_surface(d) * domain.t.powi(d as i32 - 1),
        Shape::Box => 2.0 * d as f64 * domain.t.powi(d as i32 - 1),
    }
}
