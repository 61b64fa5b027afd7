use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::SquaredError;
use super::optim::{AdamW, CosineRestarts, OptimizerConfig};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::model::{ModelParameters, Sample, DEFAULT_CHUNK};
use crate::seed::mix64;
use crate::tensor::Mat;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_rmse: f64,
    pub lr: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Weights from the epoch with the lowest validation RMSE.
    pub best: ModelParameters,
    pub best_epoch: usize,
    pub best_val_rmse: f64,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
}

impl FitResult {
    /// The log as line-delimited JSON.
    pub fn log_json_lines(&self) -> String {
        self.log
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain struct") + "\n")
            .collect()
    }
}

/// Pooled RMSE of the corrected forecasts over every valid target.
pub fn evaluate_rmse(params: &ModelParameters, samples: &[Sample], mode: ExecMode) -> Result<f64> {
    let parts = exec::try_map(mode, samples, |s| -> Result<SquaredError> {
        let truth = s.truth.as_ref().ok_or_else(|| Error::MissingField("truth".into()))?;
        let c = params.correct(&s.obs, &s.targets, DEFAULT_CHUNK)?;
        let mut acc = SquaredError::default();
        for ((t, w), y) in s.targets.iter().zip(&c.winds).zip(truth) {
            if t.valid {
                acc.push(w, y);
            }
        }
        Ok(acc)
    })?;
    let mut total = SquaredError::default();
    for p in &parts {
        total.merge(p);
    }
    total.rmse().ok_or(Error::NoTargets)
}

/// Sum of per-sample gradients for one batch, in sample order.
fn batch_gradients(
    params: &ModelParameters,
    batch: &[&Sample],
    seeds: &[u64],
    mode: ExecMode,
) -> Result<(f64, Vec<Mat>)> {
    let denom: usize = batch.iter().map(|s| s.n_valid_targets()).sum();
    let denom = denom.max(1) as f64;
    let items: Vec<(&Sample, u64)> = batch.iter().copied().zip(seeds.iter().copied()).collect();
    let parts = exec::try_map(mode, &items, |(s, seed)| params.loss_and_grads(s, denom, Some(*seed)))?;
    let mut it = parts.into_iter();
    let (mut loss, mut grads) = it.next().ok_or(Error::NoTargets)?;
    for (l, g) in it {
        loss += l;
        for (a, b) in grads.iter_mut().zip(&g) {
            a.add_assign(b);
        }
    }
    Ok((loss, grads))
}

/// Trains `init` on `train`, selecting weights by validation RMSE.
pub fn fit(
    init: &ModelParameters,
    train: &[Sample],
    val: &[Sample],
    cfg: &OptimizerConfig,
    mode: ExecMode,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<FitResult> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    for s in train {
        s.check_trainable()?;
    }
    let mut params = init.clone();
    let shapes: Vec<_> = params.weights.flat().iter().map(|m| m.shape()).collect();
    let mut opt = AdamW::new(cfg, &shapes);
    let schedule = CosineRestarts::from_config(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut log = Vec::new();
    let mut stopped_early = false;
    let start = Instant::now();

    for epoch in 0..cfg.max_epochs {
        let lr = schedule.lr(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &train[i]).collect();
            let seeds: Vec<u64> = idx
                .iter()
                .map(|&i| mix64(mix64(cfg.seed, epoch as u64), (b as u64) << 32 | i as u64))
                .collect();
            let (loss, grads) = match batch_gradients(&params, &batch, &seeds, mode) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => {
                    return Err(Error::Diverged {
                        epoch,
                        batch: b,
                        loss: f64::NAN,
                    })
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                return Err(Error::Diverged { epoch, batch: b, loss });
            }
            let mut tensors = params.weights.flat_mut();
            opt.step(&mut tensors, &grads, lr)?;
            for t in tensors {
                crate::model::snap_to_f32(t);
            }
            loss_sum += loss;
            n_batches += 1;
        }
        let val_rmse = evaluate_rmse(&params, val, mode)?;
        if !val_rmse.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: n_batches,
                loss: val_rmse,
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n_batches.max(1) as f64,
            val_rmse,
            lr,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        log.push(record);
        if val_rmse < best_val {
            best_val = val_rmse;
            best_epoch = epoch;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(FitResult {
        best,
        best_epoch,
        best_val_rmse: best_val,
        log,
        stopped_early,
    })
}
