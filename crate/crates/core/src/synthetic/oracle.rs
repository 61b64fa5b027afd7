use std::collections::BTreeMap;

use super::config::SyntheticConfig;
use super::fields::bias;
use crate::data::{GridSpec, MatchupRecord};
use crate::error::Result;
use crate::model::Sample;
use crate::training::SquaredError;

/// Per-lead RMSE of the raw forecast and of the forecast with the known
/// bias removed, both against observations.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMetrics {
    pub leads: Vec<u32>,
    pub nwp_rmse: Vec<Option<f64>>,
    pub ideal_corrector_rmse: Vec<Option<f64>>,
}

impl OracleMetrics {
    pub fn at(&self, lead: u32) -> Option<(f64, f64)> {
        let i = self.leads.iter().position(|&l| l == lead)?;
        Some((self.nwp_rmse[i]?, self.ideal_corrector_rmse[i]?))
    }
}

struct Accum {
    nwp: BTreeMap<u32, SquaredError>,
    ideal: BTreeMap<u32, SquaredError>,
}

impl Accum {
    fn new(leads: &[u32]) -> Self {
        Accum {
            nwp: leads.iter().map(|&l| (l, SquaredError::default())).collect(),
            ideal: leads.iter().map(|&l| (l, SquaredError::default())).collect(),
        }
    }

    fn finish(self, leads: &[u32]) -> OracleMetrics {
        OracleMetrics {
            leads: leads.to_vec(),
            nwp_rmse: leads.iter().map(|l| self.nwp[l].rmse()).collect(),
            ideal_corrector_rmse: leads.iter().map(|l| self.ideal[l].rmse()).collect(),
        }
    }
}

/// Accumulates over every valid target of `samples` whose lead is in
/// `leads`. The bias is evaluated at the grid node the forecast was
/// sampled from.
pub fn oracle_metrics(cfg: &SyntheticConfig, samples: &[Sample], leads: &[u32]) -> Result<OracleMetrics> {
    let grid = cfg.grid()?;
    let mut acc = Accum::new(leads);
    for s in samples {
        let (Some(nwp), Some(ideal)) = (acc.nwp.get_mut(&s.lead_hours), acc.ideal.get_mut(&s.lead_hours)) else {
            continue;
        };
        let Some(truth) = &s.truth else { continue };
        for (t, obs) in s.targets.iter().zip(truth) {
            if !t.valid {
                continue;
            }
            let node = grid.node_coord(grid.nearest_node(&t.coord)?);
            let b = bias(cfg, t.time, &node);
            nwp.push(&t.nwp_wind, obs);
            ideal.push(&t.nwp_wind.sub(&b), obs);
        }
    }
    Ok(acc.finish(leads))
}

/// Same accumulation over raw matchups, one entry per record and lead.
pub fn oracle_metrics_matchups(
    cfg: &SyntheticConfig,
    grid: &GridSpec,
    matchups: &[MatchupRecord],
    leads: &[u32],
) -> Result<OracleMetrics> {
    let mut acc = Accum::new(leads);
    for m in matchups {
        let o = &m.observation;
        let node = grid.node_coord(grid.nearest_node(&o.coord)?);
        let b = bias(cfg, o.time, &node);
        for &lead in leads {
            if let Some(f) = m.nwp_at_lead(lead) {
                acc.nwp.get_mut(&lead).expect("lead").push(&f, &o.wind);
                acc.ideal.get_mut(&lead).expect("lead").push(&f.sub(&b), &o.wind);
            }
        }
    }
    Ok(acc.finish(leads))
}
