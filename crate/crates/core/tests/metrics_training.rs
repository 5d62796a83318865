use fiinet::ingest::{DatasetSplit, EncodedExample, FieldSchema};
use fiinet::network::{Model, ModelConfig, Variant};
use fiinet::training::{auc, evaluate, log_to_jsonl, train, TrainConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// O(n²) pair count: P(score_pos > score_neg) + ½ P(tie).
fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            den += 1.0;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / den
}

fn schema(cards: &[usize]) -> Vec<FieldSchema> {
    cards
        .iter()
        .enumerate()
        .map(|(i, &c)| FieldSchema {
            name: format!("f{i}"),
            index: i,
            cardinality: c,
        })
        .collect()
}

/// Two fields of 4 values each; the label is `x0 >= 2`, so LR separates it.
fn separable(n: usize, seed: u64) -> Vec<EncodedExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x0 = rng.gen_range(0..4);
            EncodedExample {
                indices: vec![x0, rng.gen_range(0..4)],
                label: u8::from(x0 >= 2),
            }
        })
        .collect()
}

fn toy_split(seed: u64) -> DatasetSplit {
    DatasetSplit {
        train: separable(200, seed),
        valid: separable(60, seed + 1),
        test: separable(60, seed + 2),
        split_seed: seed,
    }
}

/// Noisy three-field data for the deep models.
fn noisy_split(seed: u64) -> DatasetSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<EncodedExample> {
        (0..n)
            .map(|_| {
                let idx: Vec<usize> = (0..3).map(|_| rng.gen_range(0..5)).collect();
                let p = if (idx[0] + idx[1]).is_multiple_of(2) {
                    0.8
                } else {
                    0.2
                };
                EncodedExample {
                    label: u8::from(rng.gen_bool(p)),
                    indices: idx,
                }
            })
            .collect()
    };
    DatasetSplit {
        train: draw(300),
        valid: draw(100),
        test: draw(100),
        split_seed: seed,
    }
}

fn small_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        embedding_dim: 4,
        hidden_sizes: vec![8],
        ..ModelConfig::default()
    }
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count(
        raw in prop::collection::vec((0u8..12, any::<bool>()), 2..200)
    ) {
        // a coarse score grid forces plenty of ties
        let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64 / 4.0).collect();
        let labels: Vec<u8> = raw.iter().map(|(_, l)| u8::from(*l)).collect();
        let both = labels.contains(&0) && labels.contains(&1);
        match auc(&scores, &labels) {
            Ok(a) => {
                prop_assert!(both);
                prop_assert!((a - pairwise_auc(&scores, &labels)).abs() < 1e-9);
            }
            Err(_) => prop_assert!(!both),
        }
    }

    #[test]
    fn auc_is_invariant_to_monotone_transforms(
        raw in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..100)
    ) {
        let scores: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let labels: Vec<u8> = raw.iter().map(|r| u8::from(r.1)).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let squashed: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        prop_assert!((auc(&scores, &labels).unwrap() - auc(&squashed, &labels).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn auc_edge_cases() {
    assert_eq!(auc(&[0.1, 0.9], &[0, 1]).unwrap(), 1.0);
    assert_eq!(auc(&[0.9, 0.1], &[0, 1]).unwrap(), 0.0);
    assert_eq!(auc(&[0.5, 0.5, 0.5], &[0, 1, 1]).unwrap(), 0.5);
    assert_eq!(auc(&[0.5, 0.6], &[1, 1]).unwrap_err().category(), "data");
    assert!(auc(&[0.5], &[0, 1]).is_err());
}

#[test]
fn logistic_regression_loss_decreases_every_epoch() {
    let split = toy_split(1);
    let model = Model::<f64>::new(small_config(Variant::Lr), &schema(&[4, 4]), 7).unwrap();
    let cfg = TrainConfig {
        batch_size: 16,
        learning_rate: 0.05,
        max_epochs: 5,
        patience: 10,
        ..TrainConfig::default()
    };
    let out = train(model, &split, &cfg).unwrap();
    assert_eq!(out.epochs_run, 5);
    let train_losses: Vec<f64> = out
        .log
        .iter()
        .filter(|r| r.split == "train")
        .map(|r| r.logloss)
        .collect();
    assert_eq!(train_losses.len(), 5);
    assert!(
        train_losses.windows(2).all(|w| w[1] < w[0]),
        "{train_losses:?}"
    );
    assert_eq!(out.best_valid.auc, Some(1.0));
    assert_eq!(evaluate(&out.model, &split.test).unwrap().auc, Some(1.0));
}

#[test]
fn epoch_loss_is_mean_of_batch_losses() {
    let split = noisy_split(3);
    let model = Model::<f32>::new(small_config(Variant::FiiNet), &schema(&[5, 5, 5]), 3).unwrap();
    let cfg = TrainConfig {
        batch_size: 32,
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let out = train(model, &split, &cfg).unwrap();
    let steps = split.train.len().div_ceil(cfg.batch_size);
    for (rec, losses) in out
        .log
        .iter()
        .filter(|r| r.split == "train")
        .zip(&out.batch_losses)
    {
        assert_eq!(losses.len(), steps);
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        assert!((rec.logloss - mean).abs() < 1e-6);
        assert!(rec.auc.is_none() && rec.wall_time.is_none());
    }
}

#[test]
fn selected_model_is_the_best_validation_epoch() {
    let split = noisy_split(4);
    let model = Model::<f32>::new(small_config(Variant::FiiNet), &schema(&[5, 5, 5]), 4).unwrap();
    let cfg = TrainConfig {
        batch_size: 32,
        learning_rate: 0.01,
        max_epochs: 12,
        patience: 3,
        ..TrainConfig::default()
    };
    let out = train(model, &split, &cfg).unwrap();
    let valid: Vec<_> = out.log.iter().filter(|r| r.split == "valid").collect();
    assert_eq!(valid.len(), out.epochs_run);
    let best = out.best_valid.auc.unwrap();
    assert!(valid.iter().all(|r| r.auc.unwrap() <= best));
    assert_eq!(valid[out.best_epoch - 1].auc, Some(best));
    // stopping happens exactly `patience` epochs after the best one, or at the cap
    assert!(out.epochs_run == cfg.max_epochs || out.epochs_run == out.best_epoch + cfg.patience);
    assert_eq!(evaluate(&out.model, &split.valid).unwrap(), out.best_valid);
}

#[test]
fn zero_patience_runs_one_epoch() {
    let split = toy_split(5);
    let model = Model::<f64>::new(small_config(Variant::Lr), &schema(&[4, 4]), 5).unwrap();
    let cfg = TrainConfig {
        patience: 0,
        ..TrainConfig::default()
    };
    assert_eq!(train(model, &split, &cfg).unwrap().epochs_run, 1);
}

#[test]
fn same_seed_same_log() {
    let split = noisy_split(6);
    let run = || {
        let model =
            Model::<f32>::new(small_config(Variant::FiiNet), &schema(&[5, 5, 5]), 6).unwrap();
        let cfg = TrainConfig {
            batch_size: 64,
            max_epochs: 2,
            ..TrainConfig::default()
        };
        let out = train(model, &split, &cfg).unwrap();
        (log_to_jsonl(&out.log), out.model.to_checkpoint().to_bytes())
    };
    assert_eq!(run(), run());
}

#[test]
fn invalid_settings_are_rejected() {
    let split = toy_split(7);
    let model = Model::<f64>::new(small_config(Variant::Lr), &schema(&[4, 4]), 7).unwrap();
    for cfg in [
        TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            weight_decay: -1.0,
            ..TrainConfig::default()
        },
    ] {
        assert_eq!(
            train(model.clone(), &split, &cfg).unwrap_err().category(),
            "config"
        );
    }
    let empty = DatasetSplit {
        valid: Vec::new(),
        ..split
    };
    assert!(train(model, &empty, &TrainConfig::default()).is_err());
}
