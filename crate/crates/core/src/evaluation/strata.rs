use std::io::Write;

use super::metrics::{ErrorMetric, PointResult};
use crate::error::{Error, Result};
use crate::platform::PlatformType;

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformCell {
    pub platform: PlatformType,
    pub lead_hours: u32,
    pub n: usize,
    /// Mean of `model error − baseline error`; negative is an improvement.
    /// Absent when no result of this type and lead exists.
    pub mean_difference: Option<f64>,
}

/// Per `(platform type, lead)` mean error difference, every type listed.
/// Results without a platform type are ignored.
pub fn stratify_by_platform(results: &[PointResult], leads: &[u32], metric: ErrorMetric) -> Vec<PlatformCell> {
    let mut out = Vec::with_capacity(PlatformType::ALL.len() * leads.len());
    for p in PlatformType::ALL {
        for &lead in leads {
            let (mut sum, mut n) = (0.0, 0);
            for r in results {
                if r.platform == Some(p) && r.lead_hours == lead {
                    sum += metric.error(&r.prediction, &r.truth) - metric.error(&r.baseline, &r.truth);
                    n += 1;
                }
            }
            out.push(PlatformCell {
                platform: p,
                lead_hours: lead,
                n,
                mean_difference: (n > 0).then(|| sum / n as f64),
            });
        }
    }
    out
}

pub fn write_platform_csv(cells: &[PlatformCell], metric: ErrorMetric, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::InvalidArgument(format!("writing platform table: {e}"));
    let label = format!("{}_difference_ms", metric.label());
    wtr.write_record(["platform_type", "lead_h", "n", label.as_str()]).map_err(err)?;
    for c in cells {
        wtr.write_record([
            c.platform.to_string(),
            c.lead_hours.to_string(),
            c.n.to_string(),
            c.mean_difference.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
}
