//! L1 regression with Adam, and leave-one-bearing-out evaluation.

mod adam;
mod config;
mod eval;
mod fit;
mod loss;

pub use adam::{adam_step, adam_update, AdamState};
pub use config::{Precision, TrainConfig};
pub use eval::{
    evaluate_loocv, BearingResult, ConstantEstimator, Estimator, EvalReport, NetworkEstimator,
    PerfectEstimator, PredictionPoint,
};
pub use fit::{predict_pct, train, train_with, LossHistory, PCT_PER_UNIT};
pub use loss::{l1_loss, l1_loss_backward, mae};
