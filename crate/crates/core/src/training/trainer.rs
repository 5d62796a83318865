use std::time::Instant;

use rand::seq::SliceRandom;

use crate::engine::init::rng_for;
use crate::engine::Real;
use crate::error::{Error, Result};
use crate::ingest::{DatasetSplit, EncodedExample};
use crate::network::{Batch, Mode, Model};
use crate::training::adam::{adam_step, AdamConfig, AdamState};
use crate::training::metrics::{evaluate, Evaluation, MetricRecord};

/// Optimization loop settings. Dropout and embedding width belong to the
/// model and live in [`ModelConfig`](crate::network::ModelConfig).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Stop once this many epochs pass without a better validation score.
    pub patience: usize,
    /// Drop wall-clock times from the metric log.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            learning_rate: 0.001356,
            weight_decay: 1e-5,
            max_epochs: 500,
            seed: 2023,
            patience: 5,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch_size and max_epochs must be positive".into(),
            ));
        }
        // written so that NaN fails too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(
                "learning_rate must be positive, weight_decay non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the best validation score.
    pub model: Model<T>,
    pub best_epoch: usize,
    pub best_valid: Evaluation,
    pub epochs_run: usize,
    pub log: Vec<MetricRecord>,
    /// Minibatch losses of every epoch, in step order.
    pub batch_losses: Vec<Vec<f64>>,
}

/// Validation score used for model selection: AUC when defined, otherwise
/// negative logloss.
fn selection_score(e: &Evaluation) -> f64 {
    e.auc.unwrap_or(-e.logloss)
}

pub fn train<T: Real>(
    model: Model<T>,
    split: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    train_with(model, split, cfg, |_| {})
}

/// Shuffled minibatch Adam with per-epoch validation and early stopping.
/// `on_record` sees every metric record as it is produced.
pub fn train_with<T: Real>(
    mut model: Model<T>,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    mut on_record: impl FnMut(&MetricRecord),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if split.train.is_empty() || split.valid.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let adam = cfg.adam();
    let mut state = AdamState::new(model.params());
    let started = Instant::now();
    let wall = |deterministic: bool| (!deterministic).then(|| started.elapsed().as_secs_f64());

    let mut log = Vec::new();
    let mut batch_losses = Vec::new();
    let mut best: Option<(usize, Evaluation, Model<T>)> = None;
    let mut epochs_run = 0;

    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        let mut order: Vec<&EncodedExample> = split.train.iter().collect();
        order.shuffle(&mut rng_for(cfg.seed, &format!("epoch/{epoch}")));

        let mut losses = Vec::with_capacity(order.len().div_ceil(cfg.batch_size));
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = Batch::<T>::new(chunk);
            let mode = Mode::Train {
                seed: Model::<T>::step_seed(cfg.seed, epoch, step),
            };
            let diverged = |reason: String| Error::Diverged {
                epoch,
                step,
                reason,
            };
            let (loss, grads) = model.loss_and_grad(&batch, mode).map_err(|e| match e {
                Error::NonFinite(what) => diverged(what),
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(diverged(format!("loss {loss}")));
            }
            adam_step(model.params_mut(), &grads, &mut state, &adam).map_err(|e| match e {
                Error::NonFinite(what) => diverged(what),
                other => other,
            })?;
            losses.push(loss);
        }
        let train_loss = losses.iter().sum::<f64>() / losses.len() as f64;
        batch_losses.push(losses);
        let rec = MetricRecord {
            epoch,
            split: "train".into(),
            auc: None,
            logloss: train_loss,
            wall_time: wall(cfg.deterministic),
        };
        on_record(&rec);
        log.push(rec);

        let valid = evaluate(&model, &split.valid)?;
        let rec = MetricRecord {
            epoch,
            split: "valid".into(),
            auc: valid.auc,
            logloss: valid.logloss,
            wall_time: wall(cfg.deterministic),
        };
        on_record(&rec);
        log.push(rec);

        let improved = best
            .as_ref()
            .is_none_or(|(_, b, _)| selection_score(&valid) > selection_score(b));
        if improved {
            best = Some((epoch, valid, model.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    let (best_epoch, best_valid, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_valid,
        epochs_run,
        log,
        batch_losses,
    })
}
