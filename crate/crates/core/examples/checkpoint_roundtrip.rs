//! Saves a trained model, loads it back, and confirms the evaluation is
//! bit-identical.
//!
//! `cargo run --release --example checkpoint_roundtrip`

use fiinet::engine::Checkpoint;
use fiinet::network::{Model, ModelConfig};
use fiinet::synthetic::PlantedConfig;
use fiinet::training::{evaluate, train, TrainConfig};

fn main() -> anyhow::Result<()> {
    let prepared = PlantedConfig {
        num_examples: 4000,
        ..PlantedConfig::default()
    }
    .prepared()?;
    let model = Model::<f32>::new(ModelConfig::default(), &prepared.schema(), 2023)?;
    let cfg = TrainConfig {
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let trained = train(model, &prepared.split, &cfg)?.model;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.ckpt");
    trained.to_checkpoint().save(&path)?;
    let loaded = Model::<f32>::from_checkpoint(&Checkpoint::load(&path)?)?;

    let before = evaluate(&trained, &prepared.split.test)?;
    let after = evaluate(&loaded, &prepared.split.test)?;
    println!(
        "{} bytes, {} tensors",
        std::fs::metadata(&path)?.len(),
        loaded.params().len()
    );
    println!("before: {before:?}\nafter:  {after:?}");
    anyhow::ensure!(
        before.logloss.to_bits() == after.logloss.to_bits(),
        "reloaded model disagrees"
    );
    println!("bit-identical");
    Ok(())
}
