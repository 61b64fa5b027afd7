//! Deterministic synthetic world with a known forecast bias, used to check
//! that the corrector learns what it should.

pub mod config;
pub mod fields;
pub mod oracle;
pub mod platforms;

use std::path::Path;

pub use config::{BiasMode, HarmonicComponent, SyntheticConfig};
pub use fields::{
    bias, bias_pattern, nwp_field, nwp_noise_draw, reanalysis_field, synthetic_nwp, synthetic_reanalysis,
    truth_wind, SyntheticStore,
};
pub use oracle::{oracle_metrics, oracle_metrics_matchups, OracleMetrics};
pub use platforms::{ship_track, simulate_platforms, station_sites, synthetic_observations};

use crate::data::{write_observations, DirStore};
use crate::error::{Error, Result};
use crate::exec::ExecMode;

/// File layout written by [`write_world`].
pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const FORECAST_DIR: &str = "gfs";
pub const REANALYSIS_DIR: &str = "era5";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorldSummary {
    pub observations: usize,
    pub fields: usize,
}

/// Writes the observation table and every forecast and reanalysis field
/// under `dir`, in the same formats the ingest pipeline reads.
pub fn write_world(cfg: &SyntheticConfig, dir: &Path, mode: ExecMode) -> Result<WorldSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let obs = synthetic_observations(cfg);
    write_observations(&dir.join(OBSERVATIONS_FILE), &obs)?;
    let store = SyntheticStore::new(cfg.clone())?;
    let fields = store.write_all(
        &DirStore::new(dir.join(FORECAST_DIR)),
        &DirStore::new(dir.join(REANALYSIS_DIR)),
        mode,
    )?;
    Ok(WorldSummary {
        observations: obs.len(),
        fields,
    })
}
