//! Loss functions, optimiser, learning-rate schedule and the epoch loop.

mod fit;
mod gradcheck;
mod loss;
mod optim;

pub use fit::{evaluate_rmse, fit, EpochRecord, FitResult};
pub use gradcheck::{gradient_check, gradient_check_params, random_sample, GradCheckReport, FD_STEP};
pub use loss::{rmse, vector_magnitude_loss, SquaredError};
pub use optim::{AdamW, CosineRestarts, OptimizerConfig};
