use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::attention::AttentionMask;
use crate::encodings::{encode_time, harmonic_matrix};
use crate::error::{Error, Result};
use crate::geo::GeoCoord;
use crate::platform::PlatformType;
use crate::tensor::Mat;
use crate::time::TimeStamp;
use crate::wind::WindVector;

/// A past observation paired with the NWP value at its place and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationToken {
    pub platform_id: String,
    pub platform: PlatformType,
    pub time: TimeStamp,
    pub coord: GeoCoord,
    pub obs_wind: WindVector,
    pub nwp_wind: WindVector,
    #[serde(default)]
    pub extra: Vec<f64>,
    pub valid: bool,
}

/// A query location carrying its own NWP forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetToken {
    /// Valid time of the forecast being corrected.
    pub time: TimeStamp,
    pub lead_hours: u32,
    pub coord: GeoCoord,
    pub nwp_wind: WindVector,
    #[serde(default)]
    pub extra: Vec<f64>,
    #[serde(default)]
    pub platform: Option<PlatformType>,
    /// Reanalysis value at the target, kept for benchmarking only.
    #[serde(default)]
    pub reanalysis: Option<WindVector>,
    pub valid: bool,
}

/// Observations at one issue time and the targets to correct at one lead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub issue_time: TimeStamp,
    pub lead_hours: u32,
    pub obs: Vec<ObservationToken>,
    pub targets: Vec<TargetToken>,
    /// Observed wind at each target; present for training and evaluation.
    pub truth: Option<Vec<WindVector>>,
}

impl Sample {
    pub fn n_valid_obs(&self) -> usize {
        self.obs.iter().filter(|o| o.valid).count()
    }

    pub fn n_valid_targets(&self) -> usize {
        self.targets.iter().filter(|t| t.valid).count()
    }

    pub fn target_valid(&self) -> Vec<bool> {
        self.targets.iter().map(|t| t.valid).collect()
    }

    /// Training samples need at least one valid observation, one valid
    /// target and a truth value per target.
    pub fn check_trainable(&self) -> Result<()> {
        if self.n_valid_obs() == 0 {
            return Err(Error::NoObservations);
        }
        if self.n_valid_targets() == 0 {
            return Err(Error::NoTargets);
        }
        match &self.truth {
            Some(t) if t.len() == self.targets.len() => Ok(()),
            Some(t) => Err(Error::DimensionMismatch(format!(
                "{} truth values for {} targets",
                t.len(),
                self.targets.len()
            ))),
            None => Err(Error::MissingField("truth".into())),
        }
    }
}

/// Raw per-token inputs before any learned projection.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenFeatures {
    pub features: Mat,
    /// One harmonic basis per row.
    pub basis: Mat,
    pub valid: Vec<bool>,
}

fn clean(x: f64, valid: bool) -> f64 {
    if valid && x.is_finite() {
        x
    } else {
        0.0
    }
}

fn check_extra(extra: &[f64], cfg: &ModelConfig) -> Result<()> {
    if extra.len() != cfg.extra_channels {
        return Err(Error::DimensionMismatch(format!(
            "token has {} extra channels, model expects {}",
            extra.len(),
            cfg.extra_channels
        )));
    }
    Ok(())
}

fn check_valid_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// `[obs u, v, NWP u, v] / scale`, four time features, optional platform
/// one-hot and extra channels. Masked tokens are zero-filled.
pub fn observation_features(obs: &[ObservationToken], cfg: &ModelConfig) -> Result<TokenFeatures> {
    let dim = cfg.obs_feature_dim();
    let s = cfg.wind_scale;
    let mut data = Vec::with_capacity(obs.len() * dim);
    for o in obs {
        let start = data.len();
        let tf = encode_time(o.time).0;
        data.extend_from_slice(&[o.obs_wind.u / s, o.obs_wind.v / s, o.nwp_wind.u / s, o.nwp_wind.v / s]);
        data.extend_from_slice(&tf);
        if cfg.platform_encoding {
            data.extend(PlatformType::ALL.iter().map(|&p| f64::from(u8::from(p == o.platform))));
        }
        if o.valid {
            check_extra(&o.extra, cfg)?;
        }
        if cfg.extra_channels > 0 {
            if o.extra.len() == cfg.extra_channels {
                data.extend_from_slice(&o.extra);
            } else {
                data.extend(std::iter::repeat(0.0).take(cfg.extra_channels));
            }
        }
        let row = &mut data[start..];
        if o.valid {
            check_valid_finite(row, "observation token")?;
        }
        for x in row.iter_mut() {
            *x = clean(*x, o.valid);
        }
    }
    let coords: Vec<GeoCoord> = obs.iter().map(|o| o.coord).collect();
    Ok(TokenFeatures {
        features: Mat::from_vec(obs.len(), dim, data)?,
        basis: harmonic_matrix(&coords, cfg.sh_degree)?,
        valid: obs.iter().map(|o| o.valid).collect(),
    })
}

/// `[NWP u, v] / scale`, `lead / max_lead`, four time features of the
/// valid time and extra channels. Masked tokens are zero-filled.
pub fn target_features(targets: &[TargetToken], cfg: &ModelConfig) -> Result<TokenFeatures> {
    let dim = cfg.target_feature_dim();
    let s = cfg.wind_scale;
    let mut data = Vec::with_capacity(targets.len() * dim);
    for t in targets {
        if t.valid && (t.lead_hours == 0 || t.lead_hours > cfg.max_lead_hours) {
            return Err(Error::InvalidArgument(format!(
                "lead {} h outside [1, {}]",
                t.lead_hours, cfg.max_lead_hours
            )));
        }
        let start = data.len();
        data.extend_from_slice(&[
            t.nwp_wind.u / s,
            t.nwp_wind.v / s,
            f64::from(t.lead_hours) / f64::from(cfg.max_lead_hours),
        ]);
        data.extend_from_slice(&encode_time(t.time).0);
        if t.valid {
            check_extra(&t.extra, cfg)?;
        }
        if cfg.extra_channels > 0 {
            if t.extra.len() == cfg.extra_channels {
                data.extend_from_slice(&t.extra);
            } else {
                data.extend(std::iter::repeat(0.0).take(cfg.extra_channels));
            }
        }
        let row = &mut data[start..];
        if t.valid {
            check_valid_finite(row, "target token")?;
        }
        for x in row.iter_mut() {
            *x = clean(*x, t.valid);
        }
    }
    let coords: Vec<GeoCoord> = targets.iter().map(|t| t.coord).collect();
    Ok(TokenFeatures {
        features: Mat::from_vec(targets.len(), dim, data)?,
        basis: harmonic_matrix(&coords, cfg.sh_degree)?,
        valid: targets.iter().map(|t| t.valid).collect(),
    })
}

/// Fixed sinusoidal sequence-position table, `n × dim`.
pub fn order_embedding(n: usize, dim: usize) -> Mat {
    let mut m = Mat::zeros(n, dim);
    for pos in 0..n {
        for i in 0..dim {
            let k = (i / 2) as f64;
            let angle = pos as f64 / 10_000f64.powf(2.0 * k / dim as f64);
            m[(pos, i)] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    m
}

/// Encoder and decoder inputs after projection and embedding addition.
#[derive(Debug, Clone)]
pub struct AssembledTokens {
    pub encoder_input: Mat,
    pub decoder_input: Mat,
    pub obs_mask: AttentionMask,
    pub target_valid: Vec<bool>,
}
