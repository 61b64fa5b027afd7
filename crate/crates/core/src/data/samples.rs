//! Grouping of matchups into per-issue-time training samples.

use std::collections::BTreeMap;

use super::matchup::MatchupRecord;
use crate::error::{Error, Result};
use crate::model::{ObservationToken, Sample, TargetToken};
use crate::time::TimeStamp;

/// Upper bound on observation tokens per sample.
pub const MAX_OBS_TOKENS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleOptions {
    pub history_hours: u32,
    pub max_obs: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            history_hours: 1,
            max_obs: MAX_OBS_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BuiltSamples {
    pub samples: Vec<Sample>,
    /// `(issue time, lead)` pairs with observations but no usable target.
    pub skipped_no_targets: usize,
    /// Observations left out for lack of a paired forecast.
    pub obs_without_nwp: usize,
    /// Observations dropped by the token cap.
    pub obs_truncated: usize,
}

pub fn observation_token(m: &MatchupRecord) -> Option<ObservationToken> {
    let o = &m.observation;
    Some(ObservationToken {
        platform_id: o.platform_id.clone(),
        platform: o.platform_type,
        time: o.time,
        coord: o.coord,
        obs_wind: o.wind,
        nwp_wind: m.nwp_issue?,
        extra: Vec::new(),
        valid: true,
    })
}

pub fn target_token(m: &MatchupRecord, lead: u32) -> Option<TargetToken> {
    let o = &m.observation;
    Some(TargetToken {
        time: o.time,
        lead_hours: lead,
        coord: o.coord,
        nwp_wind: m.nwp_at_lead(lead)?,
        extra: Vec::new(),
        platform: Some(o.platform_type),
        reanalysis: m.reanalysis,
        valid: true,
    })
}

/// One sample per issue time `t0` holding an observation and per lead:
/// observation tokens from `(t0 − history, t0]` paired with the forecast
/// from the latest cycle at their own time, and target tokens from every
/// matchup valid at `t0 + lead` carrying that lead's forecast. Samples are
/// ordered by `(issue time, lead)`.
pub fn build_samples(matchups: &[MatchupRecord], leads: &[u32], opts: SampleOptions) -> Result<BuiltSamples> {
    if opts.history_hours == 0 || opts.max_obs == 0 {
        return Err(Error::InvalidArgument("history and max_obs must be positive".into()));
    }
    if leads.iter().any(|&l| l == 0 || l > 48) {
        return Err(Error::InvalidArgument("leads must lie in [1, 48]".into()));
    }
    let mut by_time: BTreeMap<TimeStamp, Vec<&MatchupRecord>> = BTreeMap::new();
    for m in matchups {
        by_time.entry(m.observation.time).or_default().push(m);
    }
    for v in by_time.values_mut() {
        v.sort_by(|a, b| a.observation.platform_id.cmp(&b.observation.platform_id));
    }
    let mut out = BuiltSamples::default();
    for &t0 in by_time.keys() {
        let from = t0.add_hours(-i64::from(opts.history_hours));
        // newest hour first, platform id order within an hour
        let mut obs = Vec::new();
        for (_, ms) in by_time.range(from.add_hours(1)..=t0).rev() {
            for m in ms {
                match observation_token(m) {
                    Some(tok) => obs.push(tok),
                    None => out.obs_without_nwp += 1,
                }
            }
        }
        if obs.len() > opts.max_obs {
            out.obs_truncated += obs.len() - opts.max_obs;
            obs.truncate(opts.max_obs);
        }
        if obs.is_empty() {
            continue;
        }
        for &lead in leads {
            let valid = t0.add_hours(i64::from(lead));
            let (targets, truth): (Vec<_>, Vec<_>) = by_time
                .get(&valid)
                .into_iter()
                .flatten()
                .filter_map(|m| Some((target_token(m, lead)?, m.observation.wind)))
                .unzip();
            if targets.is_empty() {
                out.skipped_no_targets += 1;
                continue;
            }
            out.samples.push(Sample {
                issue_time: t0,
                lead_hours: lead,
                obs: obs.clone(),
                targets,
                truth: Some(truth),
            });
        }
    }
    Ok(out)
}
