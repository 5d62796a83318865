//! Test AUC and logloss as a function of the embedding width.
//!
//! `cargo run --release --example sweep_embedding_dim`

use std::path::Path;

use fiinet::cli::{cmd_sweep_k, RunConfig};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    // a smaller planted set keeps eight training runs short
    let text = format!(
        "source = planted\nplanted_examples = 5000\nmax_epochs = 20\noutput_dir = {}\n",
        dir.path().display()
    );
    let cfg = RunConfig::parse(&text, Path::new("."))?;
    cmd_sweep_k(&cfg, &[4, 8, 16, 32], &mut std::io::stdout())?;
    Ok(())
}
