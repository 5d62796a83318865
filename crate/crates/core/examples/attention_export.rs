//! Trains FiiNet, exports per-channel attention weights before and after
//! training, and lists the channels that moved the most.
//!
//! `cargo run --release --example attention_export`

use std::path::Path;

use fiinet::cli::{cmd_export_attention, cmd_train, RunConfig};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let text = format!(
        "source = planted\nmax_epochs = 50\noutput_dir = {}\n",
        dir.path().display()
    );
    let cfg = RunConfig::parse(&text, Path::new("."))?;
    let summary = cmd_train(&cfg, &mut std::io::sink())?;
    let report = cmd_export_attention(&cfg, &summary.checkpoint, &mut std::io::sink())?;

    let mut rows = report.rows.clone();
    rows.sort_by(|a, b| {
        let da = (a.weight_after - a.weight_before).abs();
        let db = (b.weight_after - b.weight_before).abs();
        db.total_cmp(&da)
    });
    println!("channel\tfields\tbefore\tafter");
    for r in rows.iter().take(8) {
        let names: Vec<&str> = r
            .fields
            .iter()
            .map(|&f| report.field_names[f].as_str())
            .collect();
        println!(
            "{}\t{}\t{:.4}\t{:.4}",
            r.channel,
            names.join("x"),
            r.weight_before,
            r.weight_after
        );
    }
    Ok(())
}
