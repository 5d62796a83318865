//! Trains FiiNet and the LR baseline on planted-interaction data and checks
//! that attention finds the planted field pair.
//!
//! `cargo run --release --example train_planted`

use std::time::Instant;

use fiinet::network::{make_variant, ModelConfig, Variant};
use fiinet::synthetic::{PlantedConfig, PLANTED_PAIR};
use fiinet::training::{evaluate, train_with, TrainConfig};

fn main() -> anyhow::Result<()> {
    let data = PlantedConfig::default();
    let prepared = data.prepared()?;
    let (split, schema) = (&prepared.split, prepared.schema());
    let cfg = TrainConfig {
        max_epochs: 50,
        ..TrainConfig::default()
    };

    for variant in [Variant::Lr, Variant::FiiNet] {
        let started = Instant::now();
        let model = make_variant::<f32>(variant, &schema, &ModelConfig::default(), cfg.seed)?;
        let out = train_with(model, split, &cfg, |r| {
            if r.split == "valid" {
                println!(
                    "  epoch {:>3} valid auc {:.4} logloss {:.4}",
                    r.epoch,
                    r.auc.unwrap_or(f64::NAN),
                    r.logloss
                );
            }
        })?;
        let test = evaluate(&out.model, &split.test)?;
        println!(
            "{}: best epoch {}, test auc {:.4}, logloss {:.4} ({:.1}s)",
            variant.display_name(),
            out.best_epoch,
            test.auc.unwrap_or(f64::NAN),
            test.logloss,
            started.elapsed().as_secs_f64()
        );
        if variant == Variant::FiiNet {
            let layout = out.model.layout().expect("FiiNet has a layout").clone();
            let weights = out.model.attention_weights(&split.test)?;
            let planted = layout
                .channel_of_pair(PLANTED_PAIR.0, PLANTED_PAIR.1)
                .expect("pair exists");
            let mut pairs = weights[..layout.num_pairs()].to_vec();
            pairs.sort_by(f64::total_cmp);
            println!(
                "planted pair weight {:.4}, median pair weight {:.4}",
                weights[planted],
                pairs[pairs.len() / 2]
            );
        }
    }
    Ok(())
}
