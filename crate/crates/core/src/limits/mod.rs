//! Distances to the Gaussian law, replicate CLT experiments, single-path
//! log-average (ASCLT) experiments and the reduction-step check.

mod ascl;
mod carrier;
mod clt;
mod distance;

pub use ascl::{ascl_logaverage, log_average, log_grid, AsclConfig, LogAverage, TestFunction};
pub use carrier::{default_waves, Carrier};
pub use clt::{
    clt_experiment, clt_run, excluded_case, reduction_experiment, CltConfig, CltResult, ReductionReport,
};
pub use distance::{
    kolmogorov_survival, ks_gauss, shape_stats, wasserstein1_gauss, wasserstein1_gauss_exact, KsResult, SampleSet,
    ShapeStats,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    /// Seconds since the Unix epoch. Not part of reproducibility comparisons.
    pub timestamp: u64,
}

impl Provenance {
    pub fn now() -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Provenance { version: env!("CARGO_PKG_VERSION").to_string(), timestamp }
    }
}

/// A self-describing experiment record: resolved configuration, one result
/// row per horizon, warnings and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport<C, R> {
    pub schema_version: u32,
    pub command: String,
    pub config: C,
    pub results: Vec<R>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

impl<C: Serialize, R: Serialize> ExperimentReport<C, R> {
    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One CSV row per result.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> crate::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.results {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Hex SHA-256 of the scaled Hermite coefficients.
pub fn expansion_digest(e: &crate::hermite::HermiteExpansion) -> String {
    let mut h = Sha256::new();
    for b in &e.scaled {
        h.update(b.to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}
