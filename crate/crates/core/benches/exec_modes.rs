//! Sequential against data-parallel execution of the hot paths.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nwpcorr::data::{build_matchups, build_samples, SampleOptions};
use nwpcorr::inference::predict_samples;
use nwpcorr::model::{ModelConfig, ModelParameters, Sample};
use nwpcorr::synthetic::{synthetic_observations, SyntheticConfig, SyntheticStore};
use nwpcorr::training::{fit, random_sample, OptimizerConfig};
use nwpcorr::ExecMode;

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn samples(n: usize) -> Vec<Sample> {
    (0..n as u64).map(|s| random_sample(s, 24, 16)).collect()
}

fn small_model() -> ModelConfig {
    ModelConfig {
        hidden_dim: 32,
        heads: 4,
        encoder_layers: 2,
        decoder_layers: 2,
        siren_hidden: 32,
        dropout: 0.0,
        ..ModelConfig::desk_scale()
    }
}

fn world() -> SyntheticConfig {
    SyntheticConfig {
        duration_hours: 72,
        ..SyntheticConfig::default()
    }
}

fn bench_inference(c: &mut Criterion) {
    let params = ModelParameters::init(ModelConfig::desk_scale(), 1).unwrap();
    let data = samples(16);
    let mut g = c.benchmark_group("predict_samples");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            b.iter(|| predict_samples(&params, &data, m).unwrap())
        });
    }
    g.finish();
}

fn bench_training_epoch(c: &mut Criterion) {
    let init = ModelParameters::init(small_model(), 1).unwrap();
    let train = samples(32);
    let val = samples(4);
    let cfg = OptimizerConfig {
        max_epochs: 1,
        early_stop_patience: 1,
        batch_size: 16,
        initial_lr: 1e-3,
        ..Default::default()
    };
    let mut g = c.benchmark_group("training_epoch");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            b.iter(|| fit(&init, &train, &val, &cfg, m, &mut |_| {}).unwrap())
        });
    }
    g.finish();
}

fn bench_matchups(c: &mut Criterion) {
    let cfg = world();
    let store = SyntheticStore::new(cfg.clone()).unwrap();
    let obs = synthetic_observations(&cfg);
    let mut g = c.benchmark_group("build_matchups");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            b.iter(|| {
                let ms = build_matchups(&obs, &store, &store, m).unwrap();
                build_samples(&ms, &[1, 24], SampleOptions::default()).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_inference, bench_training_epoch, bench_matchups);
criterion_main!(benches);
