use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Mat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub initial_lr: f64,
    /// Floor of the cosine schedule.
    pub min_lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Length of the first cosine period, epochs.
    pub restart_period: usize,
    /// Each period is this many times longer than the previous one.
    pub restart_mult: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Samples per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            initial_lr: 1e-4,
            min_lr: 0.0,
            weight_decay: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            restart_period: 10,
            restart_mult: 2,
            max_epochs: 100,
            early_stop_patience: 25,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.initial_lr > 0.0) || !(self.min_lr >= 0.0) || self.min_lr > self.initial_lr {
            return bad("learning rates must satisfy 0 <= min_lr <= initial_lr, initial_lr > 0");
        }
        if !(self.weight_decay >= 0.0) || !(self.eps > 0.0) {
            return bad("weight_decay must be >= 0 and eps > 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if self.restart_period == 0 || self.restart_mult == 0 {
            return bad("restart_period and restart_mult must be positive");
        }
        if self.max_epochs == 0 || self.early_stop_patience == 0 || self.early_stop_patience > self.max_epochs {
            return bad("need 0 < early_stop_patience <= max_epochs");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }
}

/// Cosine annealing with warm restarts, evaluated per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineRestarts {
    pub max_lr: f64,
    pub min_lr: f64,
    pub period: usize,
    pub mult: usize,
}

impl CosineRestarts {
    pub fn from_config(cfg: &OptimizerConfig) -> Self {
        CosineRestarts {
            max_lr: cfg.initial_lr,
            min_lr: cfg.min_lr,
            period: cfg.restart_period,
            mult: cfg.restart_mult,
        }
    }

    /// Position `(t_cur, t_i)` of `epoch` inside its period.
    pub fn phase(&self, epoch: usize) -> (usize, usize) {
        let (mut start, mut len) = (0, self.period);
        while epoch >= start + len {
            start += len;
            len *= self.mult;
        }
        (epoch - start, len)
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        let (t, len) = self.phase(epoch);
        self.min_lr + 0.5 * (self.max_lr - self.min_lr) * (1.0 + (PI * t as f64 / len as f64).cos())
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step: u64,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl AdamW {
    pub fn new(cfg: &OptimizerConfig, shapes: &[(usize, usize)]) -> Self {
        AdamW {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
            step: 0,
            m: shapes.iter().map(|&(r, c)| Mat::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| Mat::zeros(r, c)).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Mat], grads: &[Mat], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters and {} gradients for {} moment slots",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let g = &grads[i];
            if g.shape() != p.shape() {
                return Err(Error::DimensionMismatch(format!("gradient {i} shape")));
            }
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (k, x) in p.data_mut().iter_mut().enumerate() {
                let gk = g.data()[k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                *x -= lr * (self.weight_decay * *x + mhat / (vhat.sqrt() + self.eps));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_closed_form() {
        let s = CosineRestarts {
            max_lr: 1e-4,
            min_lr: 0.0,
            period: 10,
            mult: 2,
        };
        assert_eq!(s.lr(0), 1e-4);
        assert!((s.lr(5) - 5e-5).abs() < 1e-18);
        assert_eq!(s.lr(10), 1e-4);
        let expect = 0.5e-4 * (1.0 + (PI / 20.0).cos());
        assert!((s.lr(11) - expect).abs() < 1e-18);
        assert_eq!(s.phase(29), (19, 20));
        assert_eq!(s.phase(30), (0, 40));
        for e in 1..10 {
            assert!(s.lr(e) < s.lr(e - 1));
        }
    }

    #[test]
    fn adamw_first_step_moves_by_lr() {
        let cfg = OptimizerConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut opt = AdamW::new(&cfg, &[(1, 2)]);
        let mut p = Mat::from_vec(1, 2, vec![1.0, -1.0]).unwrap();
        let g = Mat::from_vec(1, 2, vec![0.5, -2.0]).unwrap();
        opt.step(&mut [&mut p], &[g], 0.1).unwrap();
        assert!((p[(0, 0)] - 0.9).abs() < 1e-6);
        assert!((p[(0, 1)] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn decoupled_decay_without_gradient() {
        let cfg = OptimizerConfig {
            weight_decay: 0.5,
            ..Default::default()
        };
        let mut opt = AdamW::new(&cfg, &[(1, 1)]);
        let mut p = Mat::from_vec(1, 1, vec![2.0]).unwrap();
        opt.step(&mut [&mut p], &[Mat::zeros(1, 1)], 0.1).unwrap();
        assert!((p[(0, 0)] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn adamw_minimises_quadratic() {
        let cfg = OptimizerConfig::default();
        let mut opt = AdamW::new(&cfg, &[(1, 1)]);
        let mut p = Mat::from_vec(1, 1, vec![3.0]).unwrap();
        for _ in 0..2000 {
            let g = Mat::from_vec(1, 1, vec![2.0 * (p[(0, 0)] - 1.0)]).unwrap();
            opt.step(&mut [&mut p], &[g], 0.01).unwrap();
        }
        assert!((p[(0, 0)] - 1.0).abs() < 0.02);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            early_stop_patience: 200,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
