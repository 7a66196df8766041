use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::specialfn::CovarianceModel;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

const MAGIC: &[u8; 8] = b"CHLBGRID";
const FORMAT_VERSION: u32 = 1;
const MAX_PADDING: usize = 64;

/// Regular lattice `origin + h·i`, `0 ≤ i_j < extents[j]`, row-major with the
/// last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub extents: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, spacing: f64, extents: Vec<usize>) -> Result<Self> {
        if origin.len() != extents.len() || extents.is_empty() {
            return Err(Error::Config("grid origin and extents must have the same nonzero length".into()));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::Config(format!("grid spacing must be positive, got {spacing}")));
        }
        if extents.iter().any(|&n| n == 0) {
            return Err(Error::Config("grid extents must be >= 1".into()));
        }
        Ok(GridSpec { origin, spacing, extents })
    }

    /// Lattice `h(i + 1/2)` covering `[-half_width, half_width]^d`.
    pub fn centered(d: usize, h: f64, half_width: f64) -> Result<Self> {
        let m = (half_width / h).ceil().max(1.0) as usize;
        let o = h * (0.5 - m as f64);
        GridSpec::new(vec![o; d], h, vec![2 * m; d])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether the box `[-r, r]^d` lies inside the lattice hull.
    pub fn covers(&self, r: f64) -> bool {
        let eps = 1e-9 * self.spacing;
        self.origin.iter().zip(&self.extents).all(|(&o, &n)| {
            o - 0.5 * self.spacing <= -r + eps && o + (n as f64 - 0.5) * self.spacing >= r - eps
        })
    }

    /// Coordinates of node `index` (row-major, last axis fastest).
    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for j in (0..self.dim()).rev() {
            x[j] = self.origin[j] + self.spacing * (index % self.extents[j]) as f64;
            index /= self.extents[j];
        }
        x
    }

    fn nearest_index(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for j in 0..self.dim() {
            let i = ((x[j] - self.origin[j]) / self.spacing).round();
            let i = i.clamp(0.0, (self.extents[j] - 1) as f64) as usize;
            idx = idx * self.extents[j] + i;
        }
        idx
    }
}

/// Field values on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub seed: u64,
    pub model: String,
    /// Relative mass of negative embedding eigenvalues set to zero.
    pub clipped_mass: f64,
}

impl GridField {
    pub fn nearest(&self, x: &[f64]) -> f64 {
        self.values[self.grid.nearest_index(x)]
    }

    /// Binary layout: magic `CHLBGRID`, u32 version, u32 d, d×u64 extents,
    /// d×f64 origin, f64 spacing, u64 seed, u32 tag length, UTF-8 tag, then
    /// the values as little-endian f64 in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.grid.dim() as u32).to_le_bytes())?;
        for &n in &self.grid.extents {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for &o in &self.grid.origin {
            w.write_all(&o.to_le_bytes())?;
        }
        w.write_all(&self.grid.spacing.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.model.len() as u32).to_le_bytes())?;
        w.write_all(self.model.as_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b).map_err(|e| Error::Data(format!("truncated grid file: {e}")))?;
            Ok(b)
        }
        if &take::<8, _>(&mut r)? != MAGIC {
            return Err(Error::Data("not a grid field file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(take(&mut r)?);
        if version != FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported grid format version {version}")));
        }
        let d = u32::from_le_bytes(take(&mut r)?) as usize;
        let extents = (0..d)
            .map(|_| Ok(u64::from_le_bytes(take(&mut r)?) as usize))
            .collect::<Result<Vec<_>>>()?;
        let origin = (0..d).map(|_| Ok(f64::from_le_bytes(take(&mut r)?))).collect::<Result<Vec<_>>>()?;
        let spacing = f64::from_le_bytes(take(&mut r)?);
        let seed = u64::from_le_bytes(take(&mut r)?);
        let len = u32::from_le_bytes(take(&mut r)?) as usize;
        let mut tag = vec![0u8; len];
        r.read_exact(&mut tag).map_err(|e| Error::Data(format!("truncated grid file: {e}")))?;
        let model = String::from_utf8(tag).map_err(|e| Error::Data(e.to_string()))?;
        let grid = GridSpec::new(origin, spacing, extents)?;
        let values = (0..grid.len())
            .map(|_| Ok(f64::from_le_bytes(take(&mut r)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridField { grid, values, seed, model, clipped_mass: 0.0 })
    }

    /// One row per lattice point: coordinates `x0..x{d-1}` then `value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.grid.dim();
        let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        let mut idx = vec![0usize; d];
        for v in &self.values {
            let mut rec: Vec<String> = (0..d)
                .map(|j| format!("{}", self.grid.origin[j] + self.grid.spacing * idx[j] as f64))
                .collect();
            rec.push(format!("{v:e}"));
            w.write_record(&rec)?;
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < self.grid.extents[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Precomputed square-root spectrum of the circulant embedding of a model on
/// a grid. Each draw yields two independent samples (real and imaginary part).
pub struct CirculantEmbedding {
    pub grid: GridSpec,
    pub model: CovarianceModel,
    pub padding: usize,
    pub min_eigenvalue: f64,
    pub clipped_mass: f64,
    dims: Vec<usize>,
    sqrt_lambda: Vec<f64>,
}

fn fft_nd(data: &mut [Complex64], dims: &[usize], planner: &mut FftPlanner<f64>) {
    let total = data.len();
    let mut stride = total;
    for &n in dims {
        stride /= n;
        if n == 1 {
            continue;
        }
        let fft = planner.plan_fft_forward(n);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let block = n * stride;
        for start in (0..total).step_by(block) {
            for off in 0..stride {
                for (i, l) in line.iter_mut().enumerate() {
                    *l = data[start + off + i * stride];
                }
                fft.process(&mut line);
                for (i, l) in line.iter().enumerate() {
                    data[start + off + i * stride] = *l;
                }
            }
        }
    }
}

impl CirculantEmbedding {
    pub fn new(model: &CovarianceModel, grid: &GridSpec) -> Result<Self> {
        model.validate()?;
        if grid.dim() != model.d {
            return Err(Error::Config(format!(
                "grid dimension {} does not match model dimension {}",
                grid.dim(),
                model.d
            )));
        }
        let mut planner = FftPlanner::new();
        let mut padding = 1;
        loop {
            let dims: Vec<usize> =
                grid.extents.iter().map(|&n| if n == 1 { 1 } else { 2 * (n - 1) * padding }).collect();
            let total: usize = dims.iter().product();
            let mut row = vec![Complex64::new(0.0, 0.0); total];
            let mut idx = vec![0usize; dims.len()];
            for cell in row.iter_mut() {
                let r2: f64 = idx
                    .iter()
                    .zip(&dims)
                    .map(|(&i, &m)| {
                        let lag = i.min(m - i) as f64 * grid.spacing;
                        lag * lag
                    })
                    .sum();
                *cell = Complex64::new(model.value(r2.sqrt()), 0.0);
                for j in (0..dims.len()).rev() {
                    idx[j] += 1;
                    if idx[j] < dims[j] {
                        break;
                    }
                    idx[j] = 0;
                }
            }
            fft_nd(&mut row, &dims, &mut planner);
            let lambda: Vec<f64> = row.iter().map(|c| c.re).collect();
            let max = lambda.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
            let tol = 1e-10 * max;
            if min >= -tol {
                let neg = lambda.iter().filter(|&&l| l < 0.0).fold(0.0, |s, l| s - l);
                let all: f64 = lambda.iter().map(|l| l.abs()).sum();
                let m = total as f64;
                let sqrt_lambda = lambda.iter().map(|&l| (l.max(0.0) / m).sqrt()).collect();
                return Ok(CirculantEmbedding {
                    grid: grid.clone(),
                    model: *model,
                    padding,
                    min_eigenvalue: min,
                    clipped_mass: neg / all,
                    dims,
                    sqrt_lambda,
                });
            }
            if padding >= MAX_PADDING {
                return Err(Error::Embedding(format!(
                    "circulant embedding has negative eigenvalue {min:e} (tolerance {tol:e}) at padding {padding}"
                )));
            }
            padding *= 2;
        }
    }

    /// Embedding sizes per axis.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Two independent samples from stream `(seed, Circulant, index)`.
    pub fn sample_pair(&self, seed: u64, index: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = stream(seed, Purpose::Circulant, index);
        let mut data: Vec<Complex64> = self
            .sqrt_lambda
            .iter()
            .map(|&s| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Complex64::new(s * a, s * b)
            })
            .collect();
        let mut planner = FftPlanner::new();
        fft_nd(&mut data, &self.dims, &mut planner);
        let n = self.grid.len();
        let mut re = Vec::with_capacity(n);
        let mut im = Vec::with_capacity(n);
        let ext = &self.grid.extents;
        let mut idx = vec![0usize; ext.len()];
        for _ in 0..n {
            let mut flat = 0;
            for j in 0..ext.len() {
                flat = flat * self.dims[j] + idx[j];
            }
            re.push(data[flat].re);
            im.push(data[flat].im);
            for j in (0..ext.len()).rev() {
                idx[j] += 1;
                if idx[j] < ext[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
        (re, im)
    }

    pub fn field(&self, values: Vec<f64>, seed: u64) -> GridField {
        GridField {
            grid: self.grid.clone(),
            values,
            seed,
            model: self.model.tag(),
            clipped_mass: self.clipped_mass,
        }
    }
}

/// One exact-in-law sample of `model` on `grid` (real part of draw 0).
pub fn circulant_sample(model: &CovarianceModel, grid: &GridSpec, seed: u64) -> Result<GridField> {
    let emb = CirculantEmbedding::new(model, grid)?;
    let (re, _) = emb.sample_pair(seed, 0);
    Ok(emb.field(re, seed))
}
