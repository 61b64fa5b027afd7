use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geo::GeoCoord;
use crate::model::{ModelConfig, ModelParameters, ObservationToken, Sample, TargetToken};
use crate::platform::PlatformType;
use crate::time::TimeStamp;
use crate::wind::WindVector;

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// `‖analytic − numeric‖ / (‖analytic‖ + ‖numeric‖)` per tensor.
    pub per_tensor: Vec<(String, f64)>,
    pub max_relative_error: f64,
}

/// Random sample with `n_obs` observations and `n_targets` targets.
pub fn random_sample(seed: u64, n_obs: usize, n_targets: usize) -> Sample {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let t0 = TimeStamp::from_ymdh(2020, 6, 1, 5).expect("valid date");
    let lead = 6;
    let wind = |r: &mut ChaCha8Rng| WindVector {
        u: r.gen_range(-10.0..10.0),
        v: r.gen_range(-10.0..10.0),
    };
    let coord = |r: &mut ChaCha8Rng| GeoCoord::new(r.gen_range(-15.0..15.0), r.gen_range(-45.0..-15.0)).expect("in range");
    let obs = (0..n_obs)
        .map(|i| ObservationToken {
            platform_id: format!("obs{i}"),
            platform: PlatformType::ALL[i % 7],
            time: t0,
            coord: coord(&mut r),
            obs_wind: wind(&mut r),
            nwp_wind: wind(&mut r),
            extra: vec![],
            valid: true,
        })
        .collect();
    let targets: Vec<TargetToken> = (0..n_targets)
        .map(|_| TargetToken {
            time: t0.add_hours(lead),
            lead_hours: lead as u32,
            coord: coord(&mut r),
            nwp_wind: wind(&mut r),
            extra: vec![],
            platform: None,
            reanalysis: None,
            valid: true,
        })
        .collect();
    let truth = (0..n_targets).map(|_| wind(&mut r)).collect();
    Sample {
        issue_time: t0,
        lead_hours: lead as u32,
        obs,
        targets,
        truth: Some(truth),
    }
}

/// Compares analytic gradients of the vector-magnitude loss with central
/// differences for every parameter tensor of `params` on `sample`.
pub fn gradient_check_params(params: &ModelParameters, sample: &Sample) -> Result<GradCheckReport> {
    let denom = sample.n_valid_targets().max(1) as f64;
    let (_, analytic) = params.loss_and_grads(sample, denom, None)?;
    let names = params.weights.names();
    let mut work = params.clone();
    let mut per_tensor = Vec::with_capacity(names.len());
    for (ti, name) in names.into_iter().enumerate() {
        let len = analytic[ti].data().len();
        let mut numeric = vec![0.0; len];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let orig = work.weights.flat()[ti].data()[k];
            work.weights.flat_mut()[ti].data_mut()[k] = orig + FD_STEP;
            let lp = work.loss(sample, denom)?;
            work.weights.flat_mut()[ti].data_mut()[k] = orig - FD_STEP;
            let lm = work.loss(sample, denom)?;
            work.weights.flat_mut()[ti].data_mut()[k] = orig;
            *slot = (lp - lm) / (2.0 * FD_STEP);
        }
        let a = analytic[ti].data();
        let diff = a.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rel = if na + nn == 0.0 { 0.0 } else { diff / (na + nn) };
        per_tensor.push((name, rel));
    }
    let max_relative_error = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport {
        per_tensor,
        max_relative_error,
    })
}

/// Gradient check on a freshly initialised model. The output head is
/// drawn at random so that every tensor receives a non-trivial gradient.
pub fn gradient_check(cfg: &ModelConfig, seed: u64, n_obs: usize, n_targets: usize) -> Result<GradCheckReport> {
    let cfg = ModelConfig { dropout: 0.0, ..cfg.clone() };
    let mut params = ModelParameters::init(cfg, seed)?;
    let mut r = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    for x in params.weights.head.weight.data_mut() {
        *x = r.gen_range(-0.5..0.5);
    }
    for x in params.weights.head.bias.data_mut() {
        *x = r.gen_range(-0.1..0.1);
    }
    let sample = random_sample(seed.wrapping_add(2), n_obs, n_targets);
    gradient_check_params(&params, &sample)
}
