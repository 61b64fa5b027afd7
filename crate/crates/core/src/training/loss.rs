use crate::error::{Error, Result};
use crate::wind::WindVector;

fn check(pred: &[WindVector], truth: &[WindVector], mask: &[bool]) -> Result<usize> {
    if pred.len() != truth.len() || pred.len() != mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions, {} truths, {} mask entries",
            pred.len(),
            truth.len(),
            mask.len()
        )));
    }
    match mask.iter().filter(|&&m| m).count() {
        0 => Err(Error::NoTargets),
        n => Ok(n),
    }
}

/// Mean Euclidean norm of the (u, v) error over valid targets.
pub fn vector_magnitude_loss(pred: &[WindVector], truth: &[WindVector], mask: &[bool]) -> Result<f64> {
    let n = check(pred, truth, mask)?;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((p, t), _)| (p.u - t.u).hypot(p.v - t.v))
        .sum();
    Ok(sum / n as f64)
}

/// Root-mean-square error pooled over valid targets and both components.
pub fn rmse(pred: &[WindVector], truth: &[WindVector], mask: &[bool]) -> Result<f64> {
    let n = check(pred, truth, mask)?;
    let mut acc = SquaredError::default();
    for ((p, t), &m) in pred.iter().zip(truth).zip(mask) {
        if m {
            acc.push(p, t);
        }
    }
    debug_assert_eq!(acc.count, n);
    Ok(acc.rmse().expect("non-empty"))
}

/// Running sum of squared component errors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SquaredError {
    pub sum: f64,
    pub count: usize,
}

impl SquaredError {
    pub fn push(&mut self, pred: &WindVector, truth: &WindVector) {
        let (du, dv) = (pred.u - truth.u, pred.v - truth.v);
        self.sum += du * du + dv * dv;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &SquaredError) {
        self.sum += other.sum;
        self.count += other.count;
    }

    /// Component-pooled RMSE, `None` when empty.
    pub fn rmse(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.sum / (2 * self.count) as f64).sqrt())
    }
}
