use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{BiasMode, SyntheticConfig};
use crate::data::{FieldKey, FieldStore, GridField, GridSpec};
use crate::error::Result;
use crate::exec::{self, ExecMode};
use crate::geo::GeoCoord;
use crate::seed::mix_all;
use crate::time::TimeStamp;
use crate::wind::WindVector;

const TAG_NWP: u64 = 0x6e77_70;
const TAG_REANALYSIS: u64 = 0x6572_6135;

/// Closed-form truth: each component contributes
/// `A·sin(2π·n·lon/360 + ω·t + φ)·cos(lat)` with `φ = 0` for u and
/// `φ = v_phase` for v; `t` is hours since the Unix epoch.
pub fn truth_wind(cfg: &SyntheticConfig, t: TimeStamp, coord: &GeoCoord) -> WindVector {
    let hours = t.hours() as f64;
    let cos_lat = (coord.lat() * PI / 180.0).cos();
    let mut w = WindVector::ZERO;
    for c in &cfg.components {
        let phase = 2.0 * PI * (c.wavenumber * coord.lon() / 360.0) + c.omega * hours;
        w.u += c.amplitude * phase.sin() * cos_lat;
        w.v += c.amplitude * (phase + c.v_phase).sin() * cos_lat;
    }
    w
}

/// Spatial pattern of the forecast bias, before any state scaling.
pub fn bias_pattern(cfg: &SyntheticConfig, coord: &GeoCoord) -> WindVector {
    let lon = 2.0 * PI * coord.lon() / cfg.bias_lon_period_deg;
    let lat = (2.0 * PI * coord.lat() / cfg.bias_lat_period_deg).cos();
    let b = cfg.bias_amplitude;
    WindVector {
        u: b * lon.sin() * lat,
        v: b * (lon + cfg.bias_v_phase_deg.to_radians()).sin() * lat,
    }
}

/// Forecast bias at `coord` for a forecast valid at `valid`.
pub fn bias(cfg: &SyntheticConfig, valid: TimeStamp, coord: &GeoCoord) -> WindVector {
    let p = bias_pattern(cfg, coord);
    match cfg.bias_mode {
        BiasMode::Static => p,
        BiasMode::StateDependent => {
            let k = truth_wind(cfg, valid, coord).speed() / cfg.bias_reference_speed;
            WindVector { u: p.u * k, v: p.v * k }
        }
    }
}

fn coord_words(c: &GeoCoord) -> [u64; 2] {
    [
        (c.lat() * 1e6).round() as i64 as u64,
        (c.lon() * 1e6).round() as i64 as u64,
    ]
}

fn standard_normal(seed: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed).sample(StandardNormal)
}

/// Unit-variance forecast noise draws for `(init, forecast_hour, coord)`,
/// one per component. Content-addressed, so independent of evaluation order.
pub fn nwp_noise_draw(cfg: &SyntheticConfig, init: TimeStamp, forecast_hour: u32, coord: &GeoCoord) -> WindVector {
    let [a, b] = coord_words(coord);
    let base = [TAG_NWP, init.hours() as u64, u64::from(forecast_hour), a, b];
    WindVector {
        u: standard_normal(mix_all(cfg.seed, &[&base[..], &[0]].concat())),
        v: standard_normal(mix_all(cfg.seed, &[&base[..], &[1]].concat())),
    }
}

/// Truth at the valid time plus bias plus noise with standard deviation
/// `sigma0 + sigma1·forecast_hour/48`.
pub fn synthetic_nwp(cfg: &SyntheticConfig, init: TimeStamp, forecast_hour: u32, coord: &GeoCoord) -> WindVector {
    let valid = init.add_hours(i64::from(forecast_hour));
    let truth = truth_wind(cfg, valid, coord);
    let b = bias(cfg, valid, coord);
    let z = nwp_noise_draw(cfg, init, forecast_hour, coord);
    let s = cfg.noise_std(forecast_hour);
    WindVector {
        u: truth.u + b.u + s * z.u,
        v: truth.v + b.v + s * z.v,
    }
}

/// Truth plus unbiased noise of `sigma_reanalysis`.
pub fn synthetic_reanalysis(cfg: &SyntheticConfig, valid: TimeStamp, coord: &GeoCoord) -> WindVector {
    let [a, b] = coord_words(coord);
    let truth = truth_wind(cfg, valid, coord);
    let s = cfg.sigma_reanalysis;
    WindVector {
        u: truth.u + s * standard_normal(mix_all(cfg.seed, &[TAG_REANALYSIS, valid.hours() as u64, a, b, 0])),
        v: truth.v + s * standard_normal(mix_all(cfg.seed, &[TAG_REANALYSIS, valid.hours() as u64, a, b, 1])),
    }
}

fn field_from(spec: GridSpec, init: TimeStamp, valid: TimeStamp, f: impl Fn(&GeoCoord) -> WindVector) -> GridField {
    let (u, v): (Vec<f64>, Vec<f64>) = spec
        .node_coords()
        .iter()
        .map(|c| {
            let w = f(c);
            (w.u, w.v)
        })
        .unzip();
    GridField::new(spec, init, valid, u, v)
        .expect("synthetic field matches its grid")
        .quantized()
}

/// Forecast field on the configured grid, rounded through `f32` exactly as
/// a stored field would be.
pub fn nwp_field(cfg: &SyntheticConfig, init: TimeStamp, forecast_hour: u32) -> Result<GridField> {
    let spec = cfg.grid()?;
    let valid = init.add_hours(i64::from(forecast_hour));
    Ok(field_from(spec, init, valid, |c| synthetic_nwp(cfg, init, forecast_hour, c)))
}

pub fn reanalysis_field(cfg: &SyntheticConfig, valid: TimeStamp) -> Result<GridField> {
    let spec = cfg.grid()?;
    Ok(field_from(spec, valid, valid, |c| synthetic_reanalysis(cfg, valid, c)))
}

/// Field store that generates synthetic fields on request. Forecasts exist
/// for every cycle from 48 h before the start through the end of the
/// world, at forecast hours 0..=53; reanalysis exists for every hour of
/// the world.
#[derive(Debug, Clone)]
pub struct SyntheticStore {
    cfg: Arc<SyntheticConfig>,
}

impl SyntheticStore {
    pub fn new(cfg: SyntheticConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(SyntheticStore { cfg: Arc::new(cfg) })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.cfg
    }

    pub fn first_cycle(&self) -> TimeStamp {
        self.cfg.start.add_hours(-48).cycle_floor()
    }

    /// Every key the store can answer, forecasts first.
    pub fn keys(&self) -> Vec<FieldKey> {
        let mut keys = Vec::new();
        let mut init = self.first_cycle();
        while init <= self.cfg.end() {
            for forecast_hour in 0..=53 {
                keys.push(FieldKey::Forecast { init, forecast_hour });
            }
            init = init.add_hours(6);
        }
        for h in 0..i64::from(self.cfg.duration_hours) {
            keys.push(FieldKey::Reanalysis {
                valid: self.cfg.start.add_hours(h),
            });
        }
        keys
    }

    fn contains(&self, key: &FieldKey) -> bool {
        match *key {
            FieldKey::Forecast { init, forecast_hour } => {
                init.hours() % 6 == 0 && init >= self.first_cycle() && init <= self.cfg.end() && forecast_hour <= 53
            }
            FieldKey::Reanalysis { valid } => valid >= self.cfg.start && valid <= self.cfg.end(),
        }
    }

    pub fn generate(&self, key: &FieldKey) -> Result<GridField> {
        match *key {
            FieldKey::Forecast { init, forecast_hour } => nwp_field(&self.cfg, init, forecast_hour),
            FieldKey::Reanalysis { valid } => reanalysis_field(&self.cfg, valid),
        }
    }

    /// Writes every field into `forecast` and `reanalysis` directory stores.
    pub fn write_all(
        &self,
        forecast: &crate::data::DirStore,
        reanalysis: &crate::data::DirStore,
        mode: ExecMode,
    ) -> Result<usize> {
        let keys = self.keys();
        exec::try_map(mode, &keys, |k| {
            let f = self.generate(k)?;
            match k {
                FieldKey::Forecast { .. } => forecast.write(k, &f),
                FieldKey::Reanalysis { .. } => reanalysis.write(k, &f),
            }
        })?;
        Ok(keys.len())
    }
}

impl FieldStore for SyntheticStore {
    fn load(&self, key: &FieldKey) -> Result<Option<Arc<GridField>>> {
        if !self.contains(key) {
            return Ok(None);
        }
        Ok(Some(Arc::new(self.generate(key)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::HarmonicComponent;

    fn quiet() -> SyntheticConfig {
        SyntheticConfig {
            bias_amplitude: 0.0,
            sigma0: 0.0,
            sigma1: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn zero_amplitudes_give_calm() {
        let cfg = SyntheticConfig {
            components: vec![],
            ..Default::default()
        };
        let c = GeoCoord::new(3.0, -33.0).unwrap();
        assert_eq!(truth_wind(&cfg, cfg.start, &c), WindVector::ZERO);
    }

    #[test]
    fn quarter_phase_closed_form() {
        // ω·t = π/2 at t = 6 h with ω = π/12 and lon = 0
        let cfg = SyntheticConfig {
            components: vec![HarmonicComponent {
                amplitude: 3.0,
                wavenumber: 5.0,
                omega: PI / 12.0,
                v_phase: 0.0,
            }],
            ..Default::default()
        };
        let c = GeoCoord::new(37.0, 0.0).unwrap();
        let w = truth_wind(&cfg, TimeStamp::from_hours(6), &c);
        assert!((w.u - 3.0 * (37.0 * PI / 180.0).cos()).abs() < 1e-12);
    }

    #[test]
    fn unbiased_noiseless_forecast_is_truth() {
        let cfg = quiet();
        let c = GeoCoord::new(-4.0, -25.0).unwrap();
        let init = cfg.start.add_hours(12);
        assert_eq!(synthetic_nwp(&cfg, init, 17, &c), truth_wind(&cfg, init.add_hours(17), &c));
    }

    #[test]
    fn closed_form_bias_peak() {
        // sin(2π·lon/90) = 1 at lon = 22.5, cos(2π·lat/60) = 1 at lat = 0
        let cfg = SyntheticConfig {
            sigma0: 0.0,
            sigma1: 0.0,
            ..Default::default()
        };
        let c = GeoCoord::new(0.0, 22.5).unwrap();
        let init = cfg.start;
        let d = synthetic_nwp(&cfg, init, 5, &c).sub(&truth_wind(&cfg, init.add_hours(5), &c));
        assert!((d.u - 2.0).abs() < 1e-12);
        assert!((d.v - 2.0 * (PI / 2.0 + PI / 4.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn bias_removal_identity() {
        let cfg = SyntheticConfig::default();
        let c = GeoCoord::new(5.0, -31.0).unwrap();
        let init = cfg.start.add_hours(30);
        for fh in [0, 7, 48, 53] {
            let n = synthetic_nwp(&cfg, init, fh, &c);
            let valid = init.add_hours(i64::from(fh));
            let b = bias(&cfg, valid, &c);
            let z = nwp_noise_draw(&cfg, init, fh, &c);
            let s = cfg.noise_std(fh);
            let t = truth_wind(&cfg, valid, &c);
            assert!((n.u - b.u - s * z.u - t.u).abs() < 1e-12);
            assert!((n.v - b.v - s * z.v - t.v).abs() < 1e-12);
        }
    }

    #[test]
    fn store_answers_only_its_range() {
        let cfg = SyntheticConfig {
            duration_hours: 72,
            ..Default::default()
        };
        let s = SyntheticStore::new(cfg.clone()).unwrap();
        let key = FieldKey::Forecast {
            init: cfg.start.add_hours(-48),
            forecast_hour: 53,
        };
        assert!(s.load(&key).unwrap().is_some());
        let early = FieldKey::Forecast {
            init: cfg.start.add_hours(-54),
            forecast_hour: 3,
        };
        assert!(s.load(&early).unwrap().is_none());
        // cycles every 6 h from −48 h through +66 h
        assert_eq!(s.keys().len(), 20 * 54 + 72);
    }
}
