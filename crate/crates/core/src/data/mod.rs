//! Observation ingest, gridded fields, colocation and sample construction.

pub mod correlation;
pub mod cycle;
pub mod grid;
pub mod matchup;
pub mod observations;
pub mod samples;
pub mod split;
pub mod store;

pub use correlation::{correlation_analysis, pearson, CorrelationCell};
pub use cycle::{gfs_cycle_select, latest_cycle, MAX_LEAD_HOURS, TABLE_LEADS};
pub use grid::{nearest_grid_sample, GridField, GridSpec};
pub use matchup::{append_matchups, build_matchups, read_matchups, MatchupRecord};
pub use observations::{parse_observations, write_observations, ObservationRecord, ParsedObservations};
pub use samples::{build_samples, observation_token, target_token, BuiltSamples, SampleOptions, MAX_OBS_TOKENS};
pub use split::{temporal_split, SplitPart, TemporalSplit};
pub use store::{DirStore, FieldKey, FieldStore, MemoryStore};
