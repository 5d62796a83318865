//! LR and FM baselines next to FiiNet on the same split and seed.
//!
//! `cargo run --release --example baselines`

use fiinet::network::{make_variant, ModelConfig, Variant};
use fiinet::synthetic::PlantedConfig;
use fiinet::training::{evaluate, train, TrainConfig};

fn main() -> anyhow::Result<()> {
    let prepared = PlantedConfig::default().prepared()?;
    let schema = prepared.schema();
    let cfg = TrainConfig {
        max_epochs: 50,
        ..TrainConfig::default()
    };
    println!("model\ttest_auc\ttest_logloss\tbest_epoch");
    for variant in [Variant::Lr, Variant::Fm, Variant::FiiNet] {
        let model = make_variant::<f32>(variant, &schema, &ModelConfig::default(), cfg.seed)?;
        let out = train(model, &prepared.split, &cfg)?;
        let test = evaluate(&out.model, &prepared.split.test)?;
        println!(
            "{}\t{:.4}\t{:.4}\t{}",
            variant.display_name(),
            test.auc.unwrap_or(f64::NAN),
            test.logloss,
            out.best_epoch
        );
    }
    Ok(())
}
