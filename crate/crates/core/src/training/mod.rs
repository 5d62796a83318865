//! Adam training loop, early stopping, and AUC / logloss evaluation.

mod adam;
mod metrics;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use metrics::{auc, evaluate, log_to_jsonl, Evaluation, MetricRecord};
pub use trainer::{train, train_with, TrainConfig, TrainOutcome};
