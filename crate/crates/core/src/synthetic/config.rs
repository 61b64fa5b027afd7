use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::GridSpec;
use crate::error::{Error, Result};
use crate::geo::GeoBox;
use crate::time::{self, TimeStamp};

/// One travelling wave of the truth field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicComponent {
    /// m/s
    pub amplitude: f64,
    /// Waves per 360° of longitude.
    pub wavenumber: f64,
    /// Radians per hour.
    pub omega: f64,
    /// Phase offset of the v component, radians.
    pub v_phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    /// Fixed spatial pattern.
    #[default]
    Static,
    /// Spatial pattern scaled by truth speed over `bias_reference_speed`.
    StateDependent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub domain: GeoBox,
    /// Spacing of the forecast and reanalysis grids, degrees.
    pub grid_resolution: f64,
    pub components: Vec<HarmonicComponent>,
    /// Peak forecast bias B, m/s.
    pub bias_amplitude: f64,
    pub bias_lon_period_deg: f64,
    pub bias_lat_period_deg: f64,
    /// Phase of the v bias relative to the u bias, degrees.
    pub bias_v_phase_deg: f64,
    pub bias_mode: BiasMode,
    pub bias_reference_speed: f64,
    /// Forecast noise std at forecast hour `h` is `sigma0 + sigma1·h/48`.
    pub sigma0: f64,
    pub sigma1: f64,
    pub sigma_obs: f64,
    pub sigma_reanalysis: f64,
    pub n_fixed_stations: usize,
    pub n_ships: usize,
    /// Std of each hourly ship displacement component, degrees.
    pub ship_step_deg: f64,
    #[serde(with = "time::iso")]
    pub start: TimeStamp,
    pub duration_hours: u32,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            domain: GeoBox {
                lat_min: -10.0,
                lat_max: 10.0,
                lon_min: -40.0,
                lon_max: -20.0,
            },
            grid_resolution: 1.0,
            components: vec![
                HarmonicComponent {
                    amplitude: 6.0,
                    wavenumber: 4.0,
                    omega: 2.0 * PI / 30.0,
                    v_phase: PI / 2.0,
                },
                HarmonicComponent {
                    amplitude: 3.0,
                    wavenumber: 9.0,
                    omega: 2.0 * PI / 11.0,
                    v_phase: PI / 3.0,
                },
                HarmonicComponent {
                    amplitude: 2.0,
                    wavenumber: 15.0,
                    omega: -2.0 * PI / 17.0,
                    v_phase: -PI / 4.0,
                },
            ],
            bias_amplitude: 2.0,
            bias_lon_period_deg: 90.0,
            bias_lat_period_deg: 60.0,
            bias_v_phase_deg: 45.0,
            bias_mode: BiasMode::Static,
            bias_reference_speed: 8.0,
            sigma0: 0.5,
            sigma1: 1.0,
            sigma_obs: 0.3,
            sigma_reanalysis: 0.3,
            n_fixed_stations: 10,
            n_ships: 10,
            ship_step_deg: 0.1,
            start: TimeStamp::from_hours(438_288), // 2020-01-01T00Z
            duration_hours: 60 * 24,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synthetic world: {m}")));
        let d = &self.domain;
        if !(d.lat_min < d.lat_max && d.lon_min < d.lon_max) {
            return bad("domain minimum must be below maximum");
        }
        self.grid()?;
        for s in [self.sigma0, self.sigma1, self.sigma_obs, self.sigma_reanalysis, self.ship_step_deg] {
            if !(s.is_finite() && s >= 0.0) {
                return bad("standard deviations must be finite and ≥ 0");
            }
        }
        let finite = [
            self.bias_amplitude,
            self.bias_lon_period_deg,
            self.bias_lat_period_deg,
            self.bias_v_phase_deg,
            self.bias_reference_speed,
        ];
        if finite.iter().any(|x| !x.is_finite()) || self.bias_lon_period_deg == 0.0 || self.bias_lat_period_deg == 0.0 {
            return bad("bias parameters must be finite with non-zero periods");
        }
        if self.bias_mode == BiasMode::StateDependent && self.bias_reference_speed <= 0.0 {
            return bad("bias_reference_speed must be positive");
        }
        for c in &self.components {
            if ![c.amplitude, c.wavenumber, c.omega, c.v_phase].iter().all(|x| x.is_finite()) {
                return bad("harmonic components must be finite");
            }
        }
        if self.duration_hours < 72 {
            return bad("duration must be at least 72 hours");
        }
        if self.n_fixed_stations + self.n_ships == 0 {
            return bad("at least one platform is needed");
        }
        Ok(())
    }

    /// Forecast and reanalysis grid covering the domain.
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::covering(&self.domain, self.grid_resolution)
    }

    pub fn end(&self) -> TimeStamp {
        self.start.add_hours(i64::from(self.duration_hours) - 1)
    }

    pub fn noise_std(&self, forecast_hour: u32) -> f64 {
        self.sigma0 + self.sigma1 * f64::from(forecast_hour) / 48.0
    }
}
