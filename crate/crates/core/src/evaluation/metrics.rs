use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::TABLE_LEADS;
use crate::error::{Error, Result};
use crate::geo::GeoCoord;
use crate::platform::PlatformType;
use crate::time::TimeStamp;
use crate::training::SquaredError;
use crate::wind::WindVector;

/// `(nwp − model) / nwp × 100`.
pub fn improvement(nwp_rmse: f64, model_rmse: f64) -> Result<f64> {
    if !(nwp_rmse > 0.0) || !model_rmse.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "improvement needs a positive baseline RMSE, got {nwp_rmse}"
        )));
    }
    Ok((nwp_rmse - model_rmse) / nwp_rmse * 100.0)
}

/// One corrected target with everything needed for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub lead_hours: u32,
    pub time: TimeStamp,
    pub coord: GeoCoord,
    pub platform: Option<PlatformType>,
    pub prediction: WindVector,
    pub baseline: WindVector,
    pub reanalysis: Option<WindVector>,
    pub truth: WindVector,
}

/// Per-point error used by maps and stratification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// `| ‖pred‖ − ‖obs‖ |`
    #[default]
    SpeedAbsolute,
    /// `‖pred − obs‖`
    VectorMagnitude,
}

impl ErrorMetric {
    pub fn error(self, pred: &WindVector, truth: &WindVector) -> f64 {
        match self {
            ErrorMetric::SpeedAbsolute => (pred.speed() - truth.speed()).abs(),
            ErrorMetric::VectorMagnitude => pred.sub(truth).speed(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorMetric::SpeedAbsolute => "mean_abs_speed_error",
            ErrorMetric::VectorMagnitude => "mean_vector_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub lead_hours: u32,
    pub n_targets: usize,
    pub model_rmse: Option<f64>,
    pub nwp_rmse: Option<f64>,
    pub reanalysis_rmse: Option<f64>,
    pub improvement_pct: Option<f64>,
}

/// RMSE by lead; rows with no targets carry `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

fn cell(x: Option<f64>, digits: usize) -> String {
    x.map(|v| format!("{v:.digits$}")).unwrap_or_default()
}

impl MetricTable {
    /// Table built from already computed `(lead, nwp, model)` RMSE values.
    pub fn from_rmse_pairs(pairs: &[(u32, f64, f64)]) -> Result<Self> {
        let rows = pairs
            .iter()
            .map(|&(lead, nwp, model)| {
                Ok(MetricRow {
                    lead_hours: lead,
                    n_targets: 0,
                    model_rmse: Some(model),
                    nwp_rmse: Some(nwp),
                    reanalysis_rmse: None,
                    improvement_pct: Some(improvement(nwp, model)?),
                })
            })
            .collect::<Result<_>>()?;
        Ok(MetricTable { rows })
    }

    pub fn row(&self, lead: u32) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.lead_hours == lead)
    }

    pub const HEADER: [&'static str; 6] = [
        "lead_h",
        "n_targets",
        "model_rmse_ms",
        "nwp_rmse_ms",
        "reanalysis_rmse_ms",
        "improvement_pct",
    ];

    /// Delimited text with a header; absent values are empty cells.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::InvalidArgument(format!("writing metric table: {e}"));
        wtr.write_record(Self::HEADER).map_err(err)?;
        for r in &self.rows {
            wtr.write_record([
                r.lead_hours.to_string(),
                r.n_targets.to_string(),
                cell(r.model_rmse, 6),
                cell(r.nwp_rmse, 6),
                cell(r.reanalysis_rmse, 6),
                cell(r.improvement_pct, 3),
            ])
            .map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}

/// RMSE of model, NWP and (where present) reanalysis against truth for
/// each lead in `leads`. Results at other leads are ignored.
pub fn rmse_by_lead(results: &[PointResult], leads: &[u32]) -> MetricTable {
    let mut acc: BTreeMap<u32, [SquaredError; 3]> = leads.iter().map(|&l| (l, Default::default())).collect();
    for r in results {
        if let Some(a) = acc.get_mut(&r.lead_hours) {
            a[0].push(&r.prediction, &r.truth);
            a[1].push(&r.baseline, &r.truth);
            if let Some(re) = &r.reanalysis {
                a[2].push(re, &r.truth);
            }
        }
    }
    let rows = leads
        .iter()
        .map(|l| {
            let a = &acc[l];
            let (model, nwp) = (a[0].rmse(), a[1].rmse());
            MetricRow {
                lead_hours: *l,
                n_targets: a[0].count,
                model_rmse: model,
                nwp_rmse: nwp,
                reanalysis_rmse: a[2].rmse(),
                improvement_pct: match (nwp, model) {
                    (Some(n), Some(m)) => improvement(n, m).ok(),
                    _ => None,
                },
            }
        })
        .collect();
    MetricTable { rows }
}

/// The nine table leads.
pub fn table_leads() -> Vec<u32> {
    TABLE_LEADS.to_vec()
}
