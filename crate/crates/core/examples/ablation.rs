//! FiiNet against its three ablations (both branches without attention,
//! third order only, second order only) on planted-interaction data.
//!
//! `cargo run --release --example ablation`

use std::path::Path;

use fiinet::cli::{cmd_ablate, RunConfig};
use fiinet::network::Variant;

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let text = format!(
        "source = planted\nmax_epochs = 50\noutput_dir = {}\n",
        dir.path().display()
    );
    let cfg = RunConfig::parse(&text, Path::new("."))?;
    let rows = cmd_ablate(
        &cfg,
        &[Variant::FiiNetSh, Variant::FiiNetS, Variant::FiiNetH],
        &mut std::io::stdout(),
    )?;
    let best = rows
        .iter()
        .max_by(|a, b| {
            a.test
                .auc
                .unwrap_or(0.0)
                .total_cmp(&b.test.auc.unwrap_or(0.0))
        })
        .expect("four rows");
    println!("highest test auc: {}", best.variant);
    Ok(())
}
