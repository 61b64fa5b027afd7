use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use nwpcorr::data::{MAX_OBS_TOKENS, TABLE_LEADS};
use nwpcorr::evaluation::ErrorMetric;
use nwpcorr::model::{ModelConfig, DEFAULT_CHUNK};
use nwpcorr::synthetic::SyntheticConfig;
use nwpcorr::training::OptimizerConfig;
use nwpcorr::{ExecMode, GeoBox};
use serde::{Deserialize, Serialize};

use crate::exit::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

impl From<Exec> for ExecMode {
    fn from(e: Exec) -> Self {
        match e {
            Exec::Parallel => ExecMode::Parallel,
            Exec::Sequential => ExecMode::Sequential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Files written by `synth`; enables oracle comparisons.
    #[default]
    Synthetic,
    External,
}

/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub runs_dir: PathBuf,
    /// Raw observation table; defaults to `<data_dir>/observations.csv`.
    pub observations: Option<PathBuf>,
    pub forecast_dir: Option<PathBuf>,
    pub reanalysis_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_dir: "data".into(),
            runs_dir: "runs".into(),
            observations: None,
            forecast_dir: None,
            reanalysis_dir: None,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    /// Observations outside are dropped at ingest.
    pub domain: Option<GeoBox>,
    pub history_hours: u32,
    pub max_obs: usize,
    pub leads: Vec<u32>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Synthetic,
            domain: None,
            history_hours: 1,
            max_obs: MAX_OBS_TOKENS,
            leads: TABLE_LEADS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub metric: ErrorMetric,
    pub cell_deg: f64,
    /// Lead whose results feed the spatial map.
    pub map_lead: u32,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            metric: ErrorMetric::SpeedAbsolute,
            cell_deg: 1.0,
            map_lead: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    /// Target tokens decoded per pass.
    pub chunk: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { chunk: DEFAULT_CHUNK }
    }
}

fn desk_model() -> ModelConfig {
    ModelConfig::desk_scale()
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds model initialisation and the optimizer.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub exec: Exec,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub synthetic: SyntheticConfig,
    #[serde(default = "desk_model")]
    pub model: ModelConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| UsageError(format!("config: {}", e.message().trim())).into())
    }

    /// Reads, resolves paths against the file's directory, applies the seed
    /// override and validates.
    pub fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        let full = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        cfg.resolve(full.parent().unwrap_or(Path::new(".")));
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.optimizer.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        abs(&mut p.data_dir);
        abs(&mut p.runs_dir);
        for o in [&mut p.observations, &mut p.forecast_dir, &mut p.reanalysis_dir, &mut p.checkpoint] {
            if let Some(x) = o.as_mut() {
                abs(x);
            }
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let usage = |e: nwpcorr::Error| UsageError(e.to_string());
        self.model.validate().map_err(usage)?;
        self.optimizer.validate().map_err(usage)?;
        self.synthetic.validate().map_err(usage)?;
        let d = &self.data;
        if d.leads.is_empty() || d.leads.iter().any(|&l| l == 0 || l > self.model.max_lead_hours) {
            return Err(UsageError(format!("data.leads must lie in [1, {}]", self.model.max_lead_hours)).into());
        }
        if d.history_hours == 0 || d.max_obs == 0 {
            return Err(UsageError("data.history_hours and data.max_obs must be positive".into()).into());
        }
        if !(self.evaluation.cell_deg > 0.0) || self.inference.chunk == 0 {
            return Err(UsageError("evaluation.cell_deg and inference.chunk must be positive".into()).into());
        }
        Ok(())
    }

    pub fn mode(&self) -> ExecMode {
        self.exec.into()
    }

    pub fn observations_path(&self) -> PathBuf {
        self.paths
            .observations
            .clone()
            .unwrap_or_else(|| self.paths.data_dir.join(nwpcorr::synthetic::OBSERVATIONS_FILE))
    }

    pub fn clean_observations_path(&self) -> PathBuf {
        self.paths.data_dir.join("observations_clean.csv")
    }

    pub fn forecast_dir(&self) -> PathBuf {
        self.paths
            .forecast_dir
            .clone()
            .unwrap_or_else(|| self.paths.data_dir.join(nwpcorr::synthetic::FORECAST_DIR))
    }

    pub fn reanalysis_dir(&self) -> PathBuf {
        self.paths
            .reanalysis_dir
            .clone()
            .unwrap_or_else(|| self.paths.data_dir.join(nwpcorr::synthetic::REANALYSIS_DIR))
    }

    pub fn matchup_dir(&self) -> PathBuf {
        self.paths.data_dir.join("matchups")
    }

    pub fn split_path(&self) -> PathBuf {
        self.paths.data_dir.join("split.json")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.paths
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.paths.data_dir.join("model.ckpt"))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        toml::to_string(self).context("serialising config")
    }
}
