//! Raw interaction tables → vocabularies, binary labels and encoded splits.
//!
//! A prepared data directory holds:
//!
//! - `vocab.tsv`: one line per entry, `field_name TAB raw_value TAB index`
//! - `train.txt`, `valid.txt`, `test.txt`: one example per line, the label
//!   followed by `f` space-separated vocabulary indices

pub mod bookcrossing;
mod split;
mod table;
mod vocab;

use std::fmt::Write as _;
use std::path::Path;

pub use split::{binarize_label, split_dataset, DatasetSplit, EncodedExample};
pub use table::{Bucketizer, Table};
pub use vocab::{FieldSchema, Vocabulary, OOV};

use crate::error::{Error, Result};

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const SPLIT_FILES: [&str; 3] = ["train.txt", "valid.txt", "test.txt"];

/// Book-Crossing: a rating above 6 is a positive.
pub const BOOK_CROSSING_THRESHOLD: f64 = 6.0;
/// KuaiRec: a watch ratio above 3 is a positive.
pub const KUAIREC_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareOptions {
    pub label_column: String,
    pub fields: Vec<String>,
    pub threshold: f64,
    /// Numeric columns to bucketize into `bins` quantile buckets.
    pub bucketize: Vec<(String, usize)>,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl PrepareOptions {
    pub fn new(label_column: &str, fields: &[&str], threshold: f64) -> Self {
        Self {
            label_column: label_column.to_string(),
            fields: fields.iter().map(|s| s.to_string()).collect(),
            threshold,
            bucketize: Vec::new(),
            ratios: (0.8, 0.1, 0.1),
            seed: 2023,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub vocab: Vocabulary,
    pub split: DatasetSplit,
}

impl PreparedData {
    pub fn schema(&self) -> Vec<FieldSchema> {
        self.vocab.schema()
    }
}

/// Field cells of every row after bucketizing numeric columns.
fn field_rows(table: &Table, opts: &PrepareOptions) -> Result<Vec<Vec<String>>> {
    let cols = table.columns(&opts.fields)?;
    let mut buckets: Vec<Option<Bucketizer>> = vec![None; cols.len()];
    for (name, bins) in &opts.bucketize {
        let pos =
            opts.fields.iter().position(|f| f == name).ok_or_else(|| {
                Error::Config(format!("bucketized column {name:?} is not a field"))
            })?;
        let c = cols[pos];
        buckets[pos] = Some(Bucketizer::fit(
            table.rows.iter().map(|r| r[c].as_str()),
            *bins,
        ));
    }
    Ok(table
        .rows
        .iter()
        .map(|r| {
            cols.iter()
                .zip(&buckets)
                .map(|(&c, b)| match b {
                    Some(b) => b.bucket(&r[c]),
                    None => r[c].clone(),
                })
                .collect()
        })
        .collect())
}

/// Builds the vocabulary, binarizes labels and splits.
pub fn prepare(table: &Table, opts: &PrepareOptions) -> Result<PreparedData> {
    let mut wanted = opts.fields.clone();
    wanted.push(opts.label_column.clone());
    table.columns(&wanted)?;
    let label_col = table.column(&opts.label_column).unwrap();

    let rows = field_rows(table, opts)?;
    let vocab = Vocabulary::build(&opts.fields, &rows)?;
    let examples = rows
        .iter()
        .zip(&table.rows)
        .enumerate()
        .map(|(i, (fields, raw))| {
            let score: f64 = raw[label_col].trim().parse().map_err(|_| {
                Error::Data(format!(
                    "row {}: label {:?} is not a number",
                    i + 1,
                    raw[label_col]
                ))
            })?;
            Ok(EncodedExample {
                indices: vocab.encode_row(fields)?,
                label: binarize_label(score, opts.threshold)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let split = split_dataset(examples, opts.ratios, opts.seed)?;
    Ok(PreparedData { vocab, split })
}

pub fn vocab_to_tsv(vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for (f, v, i) in vocab.entries() {
        let _ = writeln!(out, "{f}\t{v}\t{i}");
    }
    out
}

pub fn examples_to_text(examples: &[EncodedExample]) -> String {
    let mut out = String::new();
    for e in examples {
        let _ = write!(out, "{}", e.label);
        for i in &e.indices {
            let _ = write!(out, " {i}");
        }
        out.push('\n');
    }
    out
}

pub fn write_prepared(dir: &Path, data: &PreparedData) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    write(VOCAB_FILE, vocab_to_tsv(&data.vocab))?;
    let s = &data.split;
    for (name, part) in SPLIT_FILES.iter().zip([&s.train, &s.valid, &s.test]) {
        write(name, examples_to_text(part))?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_vocab(text: &str) -> Result<Vocabulary> {
    let entries = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, line)| {
            let parts: Vec<&str> = line.split('\t').collect();
            match parts.as_slice() {
                [f, v, i] => i
                    .parse::<usize>()
                    .map(|i| (f.to_string(), v.to_string(), i))
                    .map_err(|_| Error::Data(format!("vocabulary line {}: bad index", n + 1))),
                _ => Err(Error::Data(format!(
                    "vocabulary line {}: expected 3 tab-separated columns",
                    n + 1
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Vocabulary::from_entries(&entries)
}

pub fn parse_examples(text: &str, cardinalities: &[usize]) -> Result<Vec<EncodedExample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let bad = |what: &str| Error::Data(format!("example line {}: {what}", n + 1));
            let mut it = line.split_ascii_whitespace();
            let label = match it.next() {
                Some("0") => 0,
                Some("1") => 1,
                _ => return Err(bad("label must be 0 or 1")),
            };
            let indices = it
                .map(|t| t.parse::<usize>().map_err(|_| bad("bad index")))
                .collect::<Result<Vec<_>>>()?;
            if indices.len() != cardinalities.len() {
                return Err(bad(&format!(
                    "expected {} indices, got {}",
                    cardinalities.len(),
                    indices.len()
                )));
            }
            if let Some(f) = (0..indices.len()).find(|&f| indices[f] >= cardinalities[f]) {
                return Err(bad(&format!("index out of range for field {f}")));
            }
            Ok(EncodedExample { indices, label })
        })
        .collect()
}

pub fn read_prepared(dir: &Path) -> Result<PreparedData> {
    let vocab = parse_vocab(&read_text(&dir.join(VOCAB_FILE))?)?;
    let cards = vocab.cardinalities();
    let mut parts = SPLIT_FILES
        .iter()
        .map(|name| parse_examples(&read_text(&dir.join(name))?, &cards));
    let train = parts.next().unwrap()?;
    let valid = parts.next().unwrap()?;
    let test = parts.next().unwrap()?;
    Ok(PreparedData {
        vocab,
        split: DatasetSplit {
            train,
            valid,
            test,
            split_seed: 0,
        },
    })
}
