//! Realizations of stationary Gaussian fields: plane-wave superpositions
//! (evaluable anywhere) and circulant-embedding grid samples.

mod circulant;
mod planewave;

pub use circulant::{circulant_sample, CirculantEmbedding, GridField, GridSpec};
pub use planewave::{eval_field, make_planewave, DirectionMode, PlaneWaveBasis};

/// A single field path `x ↦ B(x)`.
pub trait Realization: Sync {
    fn dim(&self) -> usize;
    fn value_at(&self, x: &[f64]) -> f64;
    /// Lattice spacing when the realization only exists on a grid.
    fn lattice(&self) -> Option<&GridSpec> {
        None
    }
}

/// `B ≡ value` everywhere. Test hook for functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField {
    pub d: usize,
    pub value: f64,
}

impl Realization for ConstantField {
    fn dim(&self) -> usize {
        self.d
    }
    fn value_at(&self, _x: &[f64]) -> f64 {
        self.value
    }
}

impl Realization for PlaneWaveBasis {
    fn dim(&self) -> usize {
        self.d
    }
    fn value_at(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

impl Realization for GridField {
    fn dim(&self) -> usize {
        self.grid.dim()
    }
    fn value_at(&self, x: &[f64]) -> f64 {
        self.nearest(x)
    }
    fn lattice(&self) -> Option<&GridSpec> {
        Some(&self.grid)
    }
}
