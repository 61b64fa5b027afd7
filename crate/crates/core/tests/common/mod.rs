#![allow(dead_code)]

use nwpcorr::model::{ModelConfig, ModelParameters, ObservationToken, Sample, TargetToken};
use nwpcorr::{GeoCoord, Mat, PlatformType, TimeStamp, WindVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn wind(r: &mut ChaCha8Rng) -> WindVector {
    WindVector {
        u: r.gen_range(-12.0..12.0),
        v: r.gen_range(-12.0..12.0),
    }
}

pub fn coord(r: &mut ChaCha8Rng) -> GeoCoord {
    GeoCoord::new(r.gen_range(-20.0..20.0), r.gen_range(-50.0..-10.0)).unwrap()
}

pub fn obs_token(r: &mut ChaCha8Rng, t: TimeStamp) -> ObservationToken {
    ObservationToken {
        platform_id: format!("p{}", r.gen_range(0..1000)),
        platform: PlatformType::ALL[r.gen_range(0..7)],
        time: t,
        coord: coord(r),
        obs_wind: wind(r),
        nwp_wind: wind(r),
        extra: vec![],
        valid: true,
    }
}

pub fn target_token(r: &mut ChaCha8Rng, t: TimeStamp, lead: u32) -> TargetToken {
    TargetToken {
        time: t.add_hours(lead as i64),
        lead_hours: lead,
        coord: coord(r),
        nwp_wind: wind(r),
        extra: vec![],
        platform: None,
        reanalysis: None,
        valid: true,
    }
}

pub fn sample(seed: u64, n_obs: usize, n_targets: usize) -> Sample {
    let mut r = rng(seed);
    let t0 = TimeStamp::from_ymdh(2021, 3, 14, 7).unwrap();
    let lead = r.gen_range(1..=48);
    let obs = (0..n_obs).map(|_| obs_token(&mut r, t0)).collect();
    let targets: Vec<_> = (0..n_targets).map(|_| target_token(&mut r, t0, lead)).collect();
    let truth = targets.iter().map(|_| wind(&mut r)).collect();
    Sample {
        issue_time: t0,
        lead_hours: lead,
        obs,
        targets,
        truth: Some(truth),
    }
}

fn randomize(m: &mut Mat, r: &mut ChaCha8Rng, scale: f64) {
    for x in m.data_mut() {
        *x = r.gen_range(-scale..scale);
    }
}

/// Fresh parameters with a non-zero output head.
pub fn live_params(cfg: ModelConfig, seed: u64) -> ModelParameters {
    let mut p = ModelParameters::init(cfg, seed).unwrap();
    let mut r = rng(seed ^ 0xabcd);
    randomize(&mut p.weights.head.weight, &mut r, 0.3);
    randomize(&mut p.weights.head.bias, &mut r, 0.1);
    for m in p.weights.flat_mut() {
        nwpcorr::model::snap_to_f32(m);
    }
    p
}

pub fn max_diff(a: &[WindVector], b: &[WindVector]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.u - y.u).abs().max((x.v - y.v).abs()))
        .fold(0.0, f64::max)
}
