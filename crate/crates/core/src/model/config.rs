use serde::{Deserialize, Serialize};

use crate::attention::TargetMixing;
use crate::encodings::{basis_len, MAX_DEGREE};
use crate::error::{Error, Result};

/// Architecture hyperparameters. Stored verbatim in every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    /// Feed-forward expansion factor.
    pub ff_mult: usize,
    /// Applied to attention weights and feed-forward outputs while training.
    pub dropout: f64,
    pub sh_degree: usize,
    pub siren_hidden: usize,
    pub siren_first_omega: f64,
    pub siren_omega: f64,
    pub target_mixing: TargetMixing,
    /// Adds a sinusoidal sequence-position embedding to observation tokens.
    pub obs_order_embedding: bool,
    /// Appends a one-hot platform type to observation features.
    pub platform_encoding: bool,
    /// Extra NWP predictor channels appended to every token.
    pub extra_channels: usize,
    /// Adds a learned projection of the target NWP wind to the decoder
    /// output before the output head.
    pub gfs_skip: bool,
    /// Wind features are divided by this, and the predicted correction
    /// multiplied by it.
    pub wind_scale: f64,
    pub max_lead_hours: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::paper_scale()
    }
}

impl ModelConfig {
    /// 8 encoder and 8 decoder layers, 8 heads, hidden width 128.
    pub fn paper_scale() -> Self {
        ModelConfig {
            hidden_dim: 128,
            heads: 8,
            encoder_layers: 8,
            decoder_layers: 8,
            ff_mult: 4,
            dropout: 0.1,
            sh_degree: 3,
            siren_hidden: 128,
            siren_first_omega: 30.0,
            siren_omega: 1.0,
            target_mixing: TargetMixing::Isolated,
            obs_order_embedding: false,
            platform_encoding: false,
            extra_channels: 0,
            gfs_skip: false,
            wind_scale: 10.0,
            max_lead_hours: 48,
        }
    }

    pub fn desk_scale() -> Self {
        ModelConfig {
            hidden_dim: 64,
            heads: 4,
            encoder_layers: 4,
            decoder_layers: 4,
            siren_hidden: 64,
            ..ModelConfig::paper_scale()
        }
    }

    /// Tiny configuration used for gradient verification.
    pub fn micro() -> Self {
        ModelConfig {
            hidden_dim: 8,
            heads: 2,
            encoder_layers: 2,
            decoder_layers: 2,
            dropout: 0.0,
            sh_degree: 2,
            siren_hidden: 8,
            ..ModelConfig::paper_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.hidden_dim == 0 || self.heads == 0 || self.hidden_dim % self.heads != 0 {
            return bad(format!(
                "hidden_dim {} must be a positive multiple of heads {}",
                self.hidden_dim, self.heads
            ));
        }
        if self.sh_degree > MAX_DEGREE {
            return bad(format!("sh_degree {} exceeds {MAX_DEGREE}", self.sh_degree));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.ff_mult == 0 || self.siren_hidden == 0 {
            return bad("ff_mult and siren_hidden must be positive".into());
        }
        if !(self.wind_scale > 0.0) || !(self.siren_first_omega > 0.0) || !(self.siren_omega > 0.0) {
            return bad("wind_scale and siren frequencies must be positive".into());
        }
        if self.max_lead_hours == 0 {
            return bad("max_lead_hours must be positive".into());
        }
        Ok(())
    }

    pub fn basis_dim(&self) -> usize {
        basis_len(self.sh_degree)
    }

    /// `[obs u, v, NWP u, v, 4 time features]` plus optional platform
    /// one-hot and extra channels.
    pub fn obs_feature_dim(&self) -> usize {
        8 + if self.platform_encoding { 7 } else { 0 } + self.extra_channels
    }

    /// `[NWP u, v, lead / max_lead, 4 time features]` plus extra channels.
    pub fn target_feature_dim(&self) -> usize {
        7 + self.extra_channels
    }
}
