//! Encodes a ratings CSV into vocabulary and train/valid/test files, then
//! reads the prepared directory back.
//!
//! `cargo run --example prepare_csv`

use std::fmt::Write as _;

use fiinet::cli::{cmd_prepare, InputFormat, PrepareArgs};
use fiinet::ingest::read_prepared;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut csv = String::from("user,item,age,rating\n");
    for _ in 0..500 {
        let (user, item) = (rng.gen_range(0..40), rng.gen_range(0..25));
        let age = rng.gen_range(15..70);
        let rating = rng.gen_range(1..=10);
        writeln!(csv, "u{user},i{item},{age},{rating}")?;
    }
    let input = dir.path().join("ratings.csv");
    std::fs::write(&input, csv)?;

    // ratings above 6 are positives; age goes into 5 quantile buckets
    let args = PrepareArgs {
        input,
        schema: Some("rating:user,item,age#5".into()),
        threshold: 6.0,
        out: dir.path().join("prepared"),
        format: InputFormat::Delimited(b','),
        seed: 2023,
    };
    cmd_prepare(&args, &mut std::io::stdout())?;

    let back = read_prepared(&args.out)?;
    let positives = back.split.train.iter().filter(|e| e.label == 1).count();
    println!("train positives: {positives} of {}", back.split.train.len());
    for (field, value, index) in back.vocab.entries().filter(|e| e.0 == "age") {
        println!("  {field} {value} -> {index}");
    }
    Ok(())
}
