use std::io::Write;

use super::metrics::{ErrorMetric, PointResult};
use crate::data::{GridField, GridSpec};
use crate::error::{Error, Result};
use crate::geo::{GeoBox, GeoCoord};
use crate::time::TimeStamp;

/// Regular cells over a box; cell `(i, j)` spans
/// `[lat_min + i·size, lat_min + (i+1)·size)` and likewise in longitude,
/// with the last row and column closed at the upper edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrid {
    pub bounds: GeoBox,
    pub cell_deg: f64,
    pub n_lat: usize,
    pub n_lon: usize,
}

impl CellGrid {
    pub fn new(bounds: GeoBox, cell_deg: f64) -> Result<Self> {
        let count = |span: f64| -> Option<usize> {
            let n = span / cell_deg;
            let r = n.round();
            ((n - r).abs() < 1e-9 && r >= 1.0).then_some(r as usize)
        };
        if !(cell_deg > 0.0) {
            return Err(Error::InvalidArgument("cell size must be positive".into()));
        }
        match (count(bounds.lat_max - bounds.lat_min), count(bounds.lon_max - bounds.lon_min)) {
            (Some(n_lat), Some(n_lon)) => Ok(CellGrid {
                bounds,
                cell_deg,
                n_lat,
                n_lon,
            }),
            _ => Err(Error::InvalidArgument(format!(
                "box is not a whole number of {cell_deg}° cells"
            ))),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_lat * self.n_lon
    }

    fn axis(&self, x: f64, min: f64, n: usize) -> Option<usize> {
        let f = (x - min) / self.cell_deg;
        if f < 0.0 || f > n as f64 + 1e-9 {
            return None;
        }
        Some((f.floor() as usize).min(n - 1))
    }

    pub fn cell_of(&self, c: &GeoCoord) -> Option<usize> {
        let i = self.axis(c.lat(), self.bounds.lat_min, self.n_lat)?;
        let j = self.axis(c.lon(), self.bounds.lon_min, self.n_lon)?;
        Some(i * self.n_lon + j)
    }

    pub fn centre(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k / self.n_lon, k % self.n_lon);
        (
            self.bounds.lat_min + (i as f64 + 0.5) * self.cell_deg,
            self.bounds.lon_min + (j as f64 + 0.5) * self.cell_deg,
        )
    }

    /// Grid whose nodes are the cell centres.
    pub fn centre_spec(&self) -> Result<GridSpec> {
        let h = self.cell_deg / 2.0;
        GridSpec::new(
            self.bounds.lat_min + h,
            self.bounds.lat_max - h,
            self.bounds.lon_min + h,
            self.bounds.lon_max - h,
            self.cell_deg,
        )
    }
}

/// Additive per-cell sums; merging partial accumulations over disjoint
/// result sets equals accumulating their union.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialAccumulator {
    pub grid: CellGrid,
    pub metric: ErrorMetric,
    pub model_sum: Vec<f64>,
    pub baseline_sum: Vec<f64>,
    pub count: Vec<usize>,
    pub outside: usize,
}

impl SpatialAccumulator {
    pub fn new(grid: CellGrid, metric: ErrorMetric) -> Self {
        let n = grid.n_cells();
        SpatialAccumulator {
            grid,
            metric,
            model_sum: vec![0.0; n],
            baseline_sum: vec![0.0; n],
            count: vec![0; n],
            outside: 0,
        }
    }

    pub fn push(&mut self, r: &PointResult) {
        match self.grid.cell_of(&r.coord) {
            Some(k) => {
                self.model_sum[k] += self.metric.error(&r.prediction, &r.truth);
                self.baseline_sum[k] += self.metric.error(&r.baseline, &r.truth);
                self.count[k] += 1;
            }
            None => self.outside += 1,
        }
    }

    pub fn merge(&mut self, other: &SpatialAccumulator) -> Result<()> {
        if self.grid != other.grid || self.metric != other.metric {
            return Err(Error::InvalidArgument("accumulators cover different grids".into()));
        }
        for k in 0..self.count.len() {
            self.model_sum[k] += other.model_sum[k];
            self.baseline_sum[k] += other.baseline_sum[k];
            self.count[k] += other.count[k];
        }
        self.outside += other.outside;
        Ok(())
    }

    pub fn finish(&self) -> SpatialErrorGrid {
        let total: usize = self.count.iter().sum();
        let mean = |s: &[f64]| -> Vec<Option<f64>> {
            s.iter()
                .zip(&self.count)
                .map(|(&v, &n)| (n > 0).then(|| v / n as f64))
                .collect()
        };
        let model = mean(&self.model_sum);
        let baseline = mean(&self.baseline_sum);
        SpatialErrorGrid {
            grid: self.grid,
            metric: self.metric,
            difference: model
                .iter()
                .zip(&baseline)
                .map(|(m, b)| Some((*m)? - (*b)?))
                .collect(),
            model,
            baseline,
            count: self.count.clone(),
            obs_fraction: self
                .count
                .iter()
                .map(|&n| if total > 0 { n as f64 / total as f64 } else { 0.0 })
                .collect(),
            outside: self.outside,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialErrorGrid {
    pub grid: CellGrid,
    pub metric: ErrorMetric,
    pub model: Vec<Option<f64>>,
    pub baseline: Vec<Option<f64>>,
    /// Model minus baseline; negative cells are improvements.
    pub difference: Vec<Option<f64>>,
    pub count: Vec<usize>,
    pub obs_fraction: Vec<f64>,
    pub outside: usize,
}

/// Mean error per cell for model and baseline.
pub fn spatial_error_map(results: &[PointResult], grid: CellGrid, metric: ErrorMetric) -> SpatialErrorGrid {
    let mut acc = SpatialAccumulator::new(grid, metric);
    for r in results {
        acc.push(r);
    }
    acc.finish()
}

impl SpatialErrorGrid {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::InvalidArgument(format!("writing spatial grid: {e}"));
        let label = self.metric.label();
        wtr.write_record([
            "lat_centre".to_string(),
            "lon_centre".to_string(),
            "count".to_string(),
            "obs_fraction".to_string(),
            format!("model_{label}_ms"),
            format!("baseline_{label}_ms"),
            "difference_ms".to_string(),
        ])
        .map_err(err)?;
        let f = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        for k in 0..self.count.len() {
            let (lat, lon) = self.grid.centre(k);
            wtr.write_record([
                format!("{lat}"),
                format!("{lon}"),
                self.count[k].to_string(),
                format!("{:.6}", self.obs_fraction[k]),
                f(self.model[k]),
                f(self.baseline[k]),
                f(self.difference[k]),
            ])
            .map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Model error in `u`, baseline error in `v`, on the cell-centre grid;
    /// empty cells hold NaN.
    pub fn to_field(&self, time: TimeStamp) -> Result<GridField> {
        let nan = |x: &Option<f64>| x.unwrap_or(f64::NAN);
        GridField::new(
            self.grid.centre_spec()?,
            time,
            time,
            self.model.iter().map(nan).collect(),
            self.baseline.iter().map(nan).collect(),
        )
    }
}

/// Ordinary least squares `y ≈ intercept + slope·x`; needs two distinct
/// `x` values.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityAnalysis {
    /// `(obs fraction, model − baseline error)` per non-empty cell.
    pub rows: Vec<(f64, f64)>,
    /// `(slope, intercept)`; absent with fewer than three cells.
    pub trend: Option<(f64, f64)>,
}

/// Error change per cell against the cell's share of observations.
pub fn density_vs_improvement(grid: &SpatialErrorGrid) -> DensityAnalysis {
    let rows: Vec<(f64, f64)> = grid
        .difference
        .iter()
        .zip(&grid.obs_fraction)
        .filter_map(|(d, &f)| Some((f, (*d)?)))
        .collect();
    let trend = if rows.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
        ols_fit(&x, &y)
    } else {
        None
    };
    DensityAnalysis { rows, trend }
}

/// Density analysis per lead over one cell grid.
pub fn density_by_lead(
    results: &[PointResult],
    grid: CellGrid,
    metric: ErrorMetric,
    leads: &[u32],
) -> Vec<(u32, DensityAnalysis)> {
    leads
        .iter()
        .map(|&l| {
            let sub: Vec<PointResult> = results.iter().filter(|r| r.lead_hours == l).cloned().collect();
            (l, density_vs_improvement(&spatial_error_map(&sub, grid, metric)))
        })
        .collect()
}

pub fn write_density_csv(per_lead: &[(u32, DensityAnalysis)], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::InvalidArgument(format!("writing density rows: {e}"));
    wtr.write_record(["lead_h", "kind", "obs_fraction", "difference_ms", "slope", "intercept"])
        .map_err(err)?;
    for (lead, a) in per_lead {
        for (f, d) in &a.rows {
            wtr.write_record([lead.to_string(), "cell".into(), format!("{f:.6}"), format!("{d:.6}"), String::new(), String::new()])
                .map_err(err)?;
        }
        let (s, i) = a
            .trend
            .map(|(s, i)| (format!("{s:.6}"), format!("{i:.6}")))
            .unwrap_or_default();
        wtr.write_record([lead.to_string(), "trend".into(), String::new(), String::new(), s, i])
            .map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
}
