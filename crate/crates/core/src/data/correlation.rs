//! Correlation between observations and earlier nearby observations.

use super::observations::ObservationRecord;
use crate::error::{Error, Result};

/// Pearson correlation; `None` with fewer than two pairs or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCell {
    pub max_distance_km: f64,
    pub max_dt_hours: u32,
    pub n_pairs: usize,
    /// Absent when the bucket holds fewer than two pairs.
    pub r: Option<f64>,
}

/// For each `(distance ≤ D, 1 h ≤ Δt ≤ T)` bucket, pairs every observation
/// with each earlier observation inside the bucket and correlates the two
/// wind values, pooling u and v components into one series.
pub fn correlation_analysis(
    records: &[ObservationRecord],
    distances_km: &[f64],
    windows_h: &[u32],
) -> Result<Vec<CorrelationCell>> {
    if distances_km.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::InvalidArgument("distance thresholds must be finite and ≥ 0".into()));
    }
    let max_d = distances_km.iter().cloned().fold(0.0, f64::max);
    let max_t = windows_h.iter().copied().max().unwrap_or(0);
    let mut sorted: Vec<&ObservationRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.time);
    // (distance, Δt, past, current)
    let mut pairs = Vec::new();
    for (i, cur) in sorted.iter().enumerate() {
        for past in sorted[..i].iter().rev() {
            let dt = cur.time.hours_since(past.time);
            if dt > i64::from(max_t) {
                break;
            }
            if dt < 1 {
                continue;
            }
            let d = cur.coord.haversine_km(&past.coord);
            if d <= max_d {
                pairs.push((d, dt as u32, past.wind, cur.wind));
            }
        }
    }
    let mut out = Vec::new();
    for &dmax in distances_km {
        for &tmax in windows_h {
            let (mut x, mut y) = (Vec::new(), Vec::new());
            let mut n = 0;
            for (d, dt, p, c) in &pairs {
                if *d <= dmax && *dt <= tmax {
                    n += 1;
                    x.extend([p.u, p.v]);
                    y.extend([c.u, c.v]);
                }
            }
            out.push(CorrelationCell {
                max_distance_km: dmax,
                max_dt_hours: tmax,
                n_pairs: n,
                r: if n >= 2 { pearson(&x, &y) } else { None },
            });
        }
    }
    Ok(out)
}
