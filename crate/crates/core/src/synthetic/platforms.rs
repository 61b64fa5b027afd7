use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use super::config::SyntheticConfig;
use super::fields::truth_wind;
use crate::data::ObservationRecord;
use crate::geo::{GeoBox, GeoCoord};
use crate::platform::PlatformType;
use crate::seed::mix_all;
use crate::wind::WindVector;

const TAG_SITES: u64 = 0x5173;
const TAG_TRACK: u64 = 0x7472;
const TAG_OBS: u64 = 0x6f62;

const FIXED_TYPES: [PlatformType; 5] = [
    PlatformType::MooredBuoy,
    PlatformType::CmanStation,
    PlatformType::CoastalStation,
    PlatformType::TideGauge,
    PlatformType::FixedPlatform,
];

/// Reflects `x` into `[lo, hi]`.
pub fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    // fold into one period of length 2·span, then mirror the upper half
    x = (x - lo).rem_euclid(2.0 * span);
    if x > span {
        x = 2.0 * span - x;
    }
    lo + x
}

fn uniform_in(r: &mut ChaCha8Rng, b: &GeoBox) -> GeoCoord {
    GeoCoord::new(r.gen_range(b.lat_min..=b.lat_max), r.gen_range(b.lon_min..=b.lon_max))
        .expect("domain box lies within valid ranges")
}

/// Positions of a moving platform for each hour of the world.
pub fn ship_track(cfg: &SyntheticConfig, index: usize) -> Vec<GeoCoord> {
    let mut r = ChaCha8Rng::seed_from_u64(mix_all(cfg.seed, &[TAG_TRACK, index as u64]));
    let b = &cfg.domain;
    let start = uniform_in(&mut r, b);
    let (mut lat, mut lon) = (start.lat(), start.lon());
    let step = Normal::new(0.0, cfg.ship_step_deg).expect("validated std");
    let mut out = Vec::with_capacity(cfg.duration_hours as usize);
    for _ in 0..cfg.duration_hours {
        out.push(GeoCoord::new(lat, lon).expect("reflected inside domain"));
        lat = reflect(lat + r.sample(step), b.lat_min, b.lat_max);
        lon = reflect(lon + r.sample(step), b.lon_min, b.lon_max);
    }
    out
}

pub fn station_sites(cfg: &SyntheticConfig) -> Vec<GeoCoord> {
    let mut r = ChaCha8Rng::seed_from_u64(mix_all(cfg.seed, &[TAG_SITES]));
    (0..cfg.n_fixed_stations).map(|_| uniform_in(&mut r, &cfg.domain)).collect()
}

fn observe(cfg: &SyntheticConfig, platform: u64, hour: i64, coord: &GeoCoord, t: crate::time::TimeStamp) -> WindVector {
    let truth = truth_wind(cfg, t, coord);
    let z = |c: u64| -> f64 {
        ChaCha8Rng::seed_from_u64(mix_all(cfg.seed, &[TAG_OBS, platform, hour as u64, c])).sample(StandardNormal)
    };
    WindVector {
        u: truth.u + cfg.sigma_obs * z(0),
        v: truth.v + cfg.sigma_obs * z(1),
    }
}

/// One hourly report stream per platform: fixed stations first, then
/// moving platforms. Reports are truth plus Normal(0, σ_obs) noise.
pub fn simulate_platforms(cfg: &SyntheticConfig) -> Vec<Vec<ObservationRecord>> {
    let mut streams = Vec::new();
    for (i, site) in station_sites(cfg).into_iter().enumerate() {
        let kind = FIXED_TYPES[i % FIXED_TYPES.len()];
        let id = format!("S{:03}", i + 1);
        streams.push(
            (0..i64::from(cfg.duration_hours))
                .map(|h| {
                    let t = cfg.start.add_hours(h);
                    ObservationRecord {
                        platform_id: id.clone(),
                        platform_type: kind,
                        time: t,
                        coord: site,
                        wind: observe(cfg, i as u64, h, &site, t),
                    }
                })
                .collect(),
        );
    }
    for k in 0..cfg.n_ships {
        let kind = if k % 3 == 2 {
            PlatformType::DriftingBuoy
        } else {
            PlatformType::Ship
        };
        let id = format!("V{:03}", k + 1);
        let index = (cfg.n_fixed_stations + k) as u64;
        streams.push(
            ship_track(cfg, k)
                .into_iter()
                .enumerate()
                .map(|(h, coord)| {
                    let t = cfg.start.add_hours(h as i64);
                    ObservationRecord {
                        platform_id: id.clone(),
                        platform_type: kind,
                        time: t,
                        coord,
                        wind: observe(cfg, index, h as i64, &coord, t),
                    }
                })
                .collect(),
        );
    }
    streams
}

/// All reports sorted by `(time, platform_id)`.
pub fn synthetic_observations(cfg: &SyntheticConfig) -> Vec<ObservationRecord> {
    let mut all: Vec<_> = simulate_platforms(cfg).into_iter().flatten().collect();
    all.sort_by(|a, b| (a.time, &a.platform_id).cmp(&(b.time, &b.platform_id)));
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_reports_equal_truth() {
        let cfg = SyntheticConfig {
            sigma_obs: 0.0,
            duration_hours: 72,
            ..Default::default()
        };
        for r in synthetic_observations(&cfg) {
            assert_eq!(r.wind, truth_wind(&cfg, r.time, &r.coord));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SyntheticConfig {
            duration_hours: 100,
            ..Default::default()
        };
        assert_eq!(simulate_platforms(&cfg), simulate_platforms(&cfg));
        let other = SyntheticConfig { seed: 8, ..cfg.clone() };
        assert_ne!(simulate_platforms(&cfg), simulate_platforms(&other));
    }

    #[test]
    fn ships_stay_in_domain() {
        let cfg = SyntheticConfig {
            duration_hours: 10_000,
            ship_step_deg: 0.8,
            n_ships: 3,
            ..Default::default()
        };
        for k in 0..3 {
            for c in ship_track(&cfg, k) {
                assert!(cfg.domain.contains(&c), "{c:?}");
            }
        }
    }

    #[test]
    fn reflection() {
        assert_eq!(reflect(11.0, 0.0, 10.0), 9.0);
        assert_eq!(reflect(-3.0, 0.0, 10.0), 3.0);
        assert_eq!(reflect(25.0, 0.0, 10.0), 5.0);
        assert_eq!(reflect(4.0, 0.0, 10.0), 4.0);
    }
}
