//! Scoring of corrected forecasts: lead tables, platform strata, spatial
//! maps and observation-density trends.

pub mod metrics;
pub mod spatial;
pub mod strata;

pub use metrics::{improvement, rmse_by_lead, table_leads, ErrorMetric, MetricRow, MetricTable, PointResult};
pub use spatial::{
    density_by_lead, density_vs_improvement, ols_fit, spatial_error_map, write_density_csv, CellGrid,
    DensityAnalysis, SpatialAccumulator, SpatialErrorGrid,
};
pub use strata::{stratify_by_platform, write_platform_csv, PlatformCell};
