//! Correction at arbitrary points and on whole grids.

use std::sync::Arc;

use crate::data::{gfs_cycle_select, observation_token, FieldKey, FieldStore, GridField, MatchupRecord};
use crate::error::{Error, Result};
use crate::evaluation::PointResult;
use crate::exec::{self, ExecMode};
use crate::geo::GeoCoord;
use crate::model::{Correction, ModelParameters, ObservationToken, Sample, TargetToken, DEFAULT_CHUNK};
use crate::time::TimeStamp;
use crate::wind::WindVector;

/// Observation tokens in `(issue − history, issue]`, newest hour first and
/// platform id order within an hour.
pub fn observations_at(matchups: &[MatchupRecord], issue: TimeStamp, history_hours: u32) -> Vec<ObservationToken> {
    let from = issue.add_hours(-i64::from(history_hours));
    let mut obs: Vec<ObservationToken> = matchups
        .iter()
        .filter(|m| m.observation.time > from && m.observation.time <= issue)
        .filter_map(observation_token)
        .collect();
    obs.sort_by(|a, b| b.time.cmp(&a.time).then_with(|| a.platform_id.cmp(&b.platform_id)));
    obs
}

/// The forecast field a correction issued at `issue` for `lead` hours
/// starts from.
pub fn baseline_field(store: &dyn FieldStore, issue: TimeStamp, lead: u32) -> Result<Arc<GridField>> {
    let (init, fh) = gfs_cycle_select(issue.add_hours(i64::from(lead)), lead)?;
    let key = FieldKey::Forecast {
        init,
        forecast_hour: fh,
    };
    store
        .load(&key)?
        .ok_or_else(|| Error::MissingField(format!("forecast {}", key.file_name())))
}

fn grid_targets(baseline: &GridField, lead: u32) -> Vec<TargetToken> {
    baseline
        .spec
        .node_coords()
        .into_iter()
        .enumerate()
        .map(|(k, coord)| TargetToken {
            time: baseline.valid_time,
            lead_hours: lead,
            coord,
            nwp_wind: baseline.at_node(k),
            extra: Vec::new(),
            platform: None,
            reanalysis: None,
            valid: true,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridInference {
    pub corrected: GridField,
    pub baseline: GridField,
    /// Corrected minus baseline.
    pub difference: GridField,
    /// No observation was available; the baseline is returned unchanged.
    pub fallback: bool,
}

fn field_like(base: &GridField, winds: &[WindVector], fallback: bool) -> Result<GridField> {
    let mut f = GridField::new(
        base.spec,
        base.init_time,
        base.valid_time,
        winds.iter().map(|w| w.u).collect(),
        winds.iter().map(|w| w.v).collect(),
    )?;
    f.fallback = fallback;
    Ok(f)
}

/// Corrects every node of `baseline`, valid `lead` hours after the issue
/// time. The encoder runs once; nodes are decoded `chunk` at a time.
pub fn grid_inference(
    params: &ModelParameters,
    obs: &[ObservationToken],
    baseline: &GridField,
    lead: u32,
    chunk: usize,
) -> Result<GridInference> {
    let targets = grid_targets(baseline, lead);
    let c = params.correct(obs, &targets, chunk)?;
    let diff: Vec<WindVector> = c.winds.iter().zip(&targets).map(|(w, t)| w.sub(&t.nwp_wind)).collect();
    Ok(GridInference {
        corrected: field_like(baseline, &c.winds, c.fallback)?,
        baseline: baseline.clone(),
        difference: field_like(baseline, &diff, c.fallback)?,
        fallback: c.fallback,
    })
}

/// Corrects arbitrary points in one pass. Each point takes the baseline
/// value of its nearest node; points off the grid are rejected.
pub fn point_inference(
    params: &ModelParameters,
    obs: &[ObservationToken],
    baseline: &GridField,
    lead: u32,
    coords: &[GeoCoord],
) -> Result<Correction> {
    let targets = coords
        .iter()
        .map(|c| {
            Ok(TargetToken {
                time: baseline.valid_time,
                lead_hours: lead,
                coord: *c,
                nwp_wind: baseline.at_node(baseline.spec.nearest_node(c)?),
                extra: Vec::new(),
                platform: None,
                reanalysis: None,
                valid: true,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    params.correct(obs, &targets, DEFAULT_CHUNK.max(targets.len()))
}

/// Scored results for every valid target of every sample, in sample order.
pub fn predict_samples(params: &ModelParameters, samples: &[Sample], mode: ExecMode) -> Result<Vec<PointResult>> {
    let parts = exec::try_map(mode, samples, |s| -> Result<Vec<PointResult>> {
        let truth = s.truth.as_ref().ok_or_else(|| Error::MissingField("truth".into()))?;
        let c = params.correct(&s.obs, &s.targets, DEFAULT_CHUNK)?;
        Ok(s.targets
            .iter()
            .zip(&c.winds)
            .zip(truth)
            .filter(|((t, _), _)| t.valid)
            .map(|((t, w), y)| PointResult {
                lead_hours: t.lead_hours,
                time: t.time,
                coord: t.coord,
                platform: t.platform,
                prediction: *w,
                baseline: t.nwp_wind,
                reanalysis: t.reanalysis,
                truth: *y,
            })
            .collect())
    })?;
    Ok(parts.into_iter().flatten().collect())
}
