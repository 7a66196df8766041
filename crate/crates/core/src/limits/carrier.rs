use crate::error::{Error, Result};
use crate::fieldgen::{make_planewave, CirculantEmbedding, DirectionMode, GridSpec, PlaneWaveBasis, Realization};
use crate::functionals::{sample_on_lattice, Lattice};
use crate::rng::child_seed;
use crate::specialfn::{CovarianceModel, ModelKind};
use serde::{Deserialize, Serialize};

/// How field realizations are synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Carrier {
    /// Plane waves for Berry models, circulant embedding otherwise.
    #[default]
    Auto,
    Planewave,
    Circulant,
}

pub const RANDOM_SPHERE_WAVES: usize = 4096;

/// Default wave count: enough equispaced directions for the covariance to
/// match `J_0` over the whole domain diameter.
pub fn default_waves(d: usize, diameter: f64) -> usize {
    if d == 2 {
        256usize.max((1.5 * diameter).ceil() as usize)
    } else {
        RANDOM_SPHERE_WAVES
    }
}

pub(crate) enum Source {
    Waves { base: PlaneWaveBasis },
    Grid { emb: CirculantEmbedding },
}

impl Source {
    pub fn new(
        model: &CovarianceModel,
        carrier: Carrier,
        reach: f64,
        h: f64,
        waves: usize,
        seed: u64,
    ) -> Result<Self> {
        let carrier = match carrier {
            Carrier::Auto if model.kind == ModelKind::Berry => Carrier::Planewave,
            Carrier::Auto => Carrier::Circulant,
            c => c,
        };
        match carrier {
            Carrier::Planewave => {
                if model.kind != ModelKind::Berry {
                    return Err(Error::Config(format!(
                        "plane-wave synthesis realizes Berry covariances only, not {}",
                        model.tag()
                    )));
                }
                let mode = if model.d == 2 { DirectionMode::Deterministic } else { DirectionMode::RandomSphere };
                Ok(Source::Waves { base: make_planewave(model.d, waves, mode, seed)? })
            }
            _ => {
                let grid = GridSpec::centered(model.d, h, reach)?;
                Ok(Source::Grid { emb: CirculantEmbedding::new(model, &grid)? })
            }
        }
    }

    pub fn clipped_mass(&self) -> f64 {
        match self {
            Source::Grid { emb } => emb.clipped_mass,
            Source::Waves { .. } => 0.0,
        }
    }

    /// Lattice values of replicates `2j` and `2j + 1`.
    pub fn pair(&self, lattice: &Lattice, seed: u64, j: u64) -> Result<[Vec<f64>; 2]> {
        match self {
            Source::Grid { emb } => {
                let (a, b) = emb.sample_pair(seed, j);
                let fa = emb.field(a, seed);
                let fb = emb.field(b, seed);
                Ok([sample_on_lattice(&fa, lattice)?, sample_on_lattice(&fb, lattice)?])
            }
            Source::Waves { base } => {
                let one = |i: u64| -> Result<Vec<f64>> {
                    let b = self.wave_replicate(base, seed, i)?;
                    sample_on_lattice(&b, lattice)
                };
                Ok([one(2 * j)?, one(2 * j + 1)?])
            }
        }
    }

    fn wave_replicate(&self, base: &PlaneWaveBasis, seed: u64, i: u64) -> Result<PlaneWaveBasis> {
        let s = child_seed(seed, i);
        match base.mode {
            DirectionMode::Deterministic => Ok(base.redraw(s)),
            DirectionMode::RandomSphere => make_planewave(base.d, base.k, DirectionMode::RandomSphere, s),
        }
    }

    /// A single path for log-average experiments.
    pub fn path(&self, seed: u64) -> Box<dyn Realization + '_> {
        match self {
            Source::Grid { emb } => {
                let (a, _) = emb.sample_pair(seed, 0);
                Box::new(emb.field(a, seed))
            }
            Source::Waves { base } => Box::new(base.redraw(seed)),
        }
    }
}
