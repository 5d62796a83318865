//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored, as is anything after
//! a `#` on a value line. Keys may appear once. Unknown keys are rejected.
//! See `docs/config.md` for the full key list.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::engine::GradCheckOptions;
use crate::error::{Error, Result};
use crate::ingest::bookcrossing::BookCrossingOptions;
use crate::ingest::{PrepareOptions, BOOK_CROSSING_THRESHOLD};
use crate::network::{ModelConfig, Variant};
use crate::sk_attention::{Pooling, SkConfig};
use crate::synthetic::PlantedConfig;
use crate::training::TrainConfig;

/// Where examples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// A directory written by `prepare` or `synth`.
    Prepared { dir: PathBuf },
    /// A delimited text file with a header row.
    Raw {
        input: PathBuf,
        delimiter: u8,
        options: PrepareOptions,
    },
    /// The three Book-Crossing CSV files in one directory.
    BookCrossing {
        dir: PathBuf,
        loader: BookCrossingOptions,
        options: PrepareOptions,
    },
    /// Planted-interaction data generated in memory.
    Planted(PlantedConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: DataSource,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub gradcheck: GradCheckOptions,
    pub gradcheck_threshold: f64,
    /// Training examples fed to the gradient check.
    pub gradcheck_examples: usize,
}

const KEYS: &[&str] = &[
    "source",
    "data_dir",
    "input",
    "delimiter",
    "label_column",
    "fields",
    "threshold",
    "bucketize",
    "split_ratios",
    "max_interactions",
    "explicit_only",
    "planted_examples",
    "planted_fields",
    "planted_vocab",
    "output_dir",
    "variant",
    "embedding_dim",
    "hidden_sizes",
    "dropout",
    "reduction_ratio",
    "min_reduced_dim",
    "pooling",
    "batch_size",
    "learning_rate",
    "weight_decay",
    "max_epochs",
    "patience",
    "seed",
    "deterministic",
    "gradcheck_eps",
    "gradcheck_max_coords",
    "gradcheck_threshold",
    "gradcheck_examples",
];

/// Raw key/value pairs with line numbers, consumed as they are read so that
/// leftovers can be reported.
struct Entries {
    values: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "line {}: unknown key {key:?}",
                    n + 1
                )));
            }
            if values
                .insert(key.clone(), (n + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key:?}",
                    n + 1
                )));
            }
        }
        Ok(Self { values })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(_, v)| v.as_str())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse {key} = {v:?}"))),
        }
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn require(&self, key: &str, why: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::Config(format!("{key} is required {why}")))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((line, v)) = self.values.get(key) else {
            return Ok(None);
        };
        parse_list(v)
            .map(Some)
            .map_err(|_| Error::Config(format!("line {line}: cannot parse {key} = {v:?}")))
    }
}

/// Comma-separated values, surrounding whitespace ignored.
pub fn parse_list<T: FromStr>(text: &str) -> std::result::Result<Vec<T>, T::Err> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn parse_delimiter(raw: &str) -> Result<u8> {
    match raw {
        "tab" | "\\t" => Ok(b'\t'),
        "comma" => Ok(b','),
        "semicolon" => Ok(b';'),
        s if s.len() == 1 => Ok(s.as_bytes()[0]),
        s => Err(Error::Config(format!(
            "delimiter {s:?} must be one byte, tab, comma or semicolon"
        ))),
    }
}

/// `name:bins` pairs, comma separated.
fn parse_bucketize(raw: &str) -> Result<Vec<(String, usize)>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (name, bins) = item.split_once(':').ok_or_else(|| {
                Error::Config(format!("bucketize entry {item:?} must be name:bins"))
            })?;
            let bins: usize = bins.parse().map_err(|_| {
                Error::Config(format!("bucketize entry {item:?} must be name:bins"))
            })?;
            Ok((name.trim().to_string(), bins))
        })
        .collect()
}

fn parse_ratios(raw: &str) -> Result<(f64, f64, f64)> {
    let v: Vec<f64> =
        parse_list(raw).map_err(|_| Error::Config(format!("split_ratios {raw:?}")))?;
    match v.as_slice() {
        &[a, b, c] => Ok((a, b, c)),
        _ => Err(Error::Config("split_ratios needs three values".into())),
    }
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::parse(&text, path.parent().unwrap_or(Path::new(".")))?;
        cfg.validate_paths()?;
        Ok(cfg)
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let e = Entries::parse(text)?;
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let seed: u64 = e.get_or("seed", 2023)?;

        let source_kind = match (e.raw("source"), e.raw("data_dir")) {
            (Some(s), _) => s.to_string(),
            (None, Some(_)) => "prepared".into(),
            (None, None) => {
                return Err(Error::Config(
                    "either source or data_dir is required".into(),
                ))
            }
        };
        let prepare_options = |threshold_default: Option<f64>| -> Result<PrepareOptions> {
            let label = e.require("label_column", "for raw input")?;
            let fields: Vec<String> = e
                .list("fields")?
                .ok_or_else(|| Error::Config("fields is required for raw input".into()))?;
            let threshold = match (e.get("threshold")?, threshold_default) {
                (Some(t), _) | (None, Some(t)) => t,
                (None, None) => {
                    return Err(Error::Config("threshold is required for raw input".into()))
                }
            };
            let mut opts = PrepareOptions {
                label_column: label.to_string(),
                fields,
                threshold,
                bucketize: e
                    .raw("bucketize")
                    .map(parse_bucketize)
                    .transpose()?
                    .unwrap_or_default(),
                ..PrepareOptions::new("", &[], 0.0)
            };
            opts.seed = seed;
            if let Some(r) = e.raw("split_ratios") {
                opts.ratios = parse_ratios(r)?;
            }
            Ok(opts)
        };
        let source = match source_kind.as_str() {
            "prepared" => DataSource::Prepared {
                dir: resolve(e.require("data_dir", "for source = prepared")?),
            },
            "raw" => DataSource::Raw {
                input: resolve(e.require("input", "for source = raw")?),
                delimiter: parse_delimiter(e.raw("delimiter").unwrap_or(","))?,
                options: prepare_options(None)?,
            },
            "bookcrossing" => {
                let mut options = crate::ingest::bookcrossing::prepare_options(seed);
                if e.raw("label_column").is_some() || e.raw("fields").is_some() {
                    options = prepare_options(Some(BOOK_CROSSING_THRESHOLD))?;
                } else if let Some(t) = e.get("threshold")? {
                    options.threshold = t;
                }
                if let Some(r) = e.raw("split_ratios") {
                    options.ratios = parse_ratios(r)?;
                }
                let defaults = BookCrossingOptions::default();
                let max: usize =
                    e.get_or("max_interactions", defaults.max_interactions.unwrap_or(0))?;
                DataSource::BookCrossing {
                    dir: resolve(e.require("input", "for source = bookcrossing")?),
                    loader: BookCrossingOptions {
                        max_interactions: (max > 0).then_some(max),
                        explicit_only: e.get_or("explicit_only", defaults.explicit_only)?,
                        seed,
                    },
                    options,
                }
            }
            "planted" => {
                let d = PlantedConfig::default();
                DataSource::Planted(PlantedConfig {
                    num_examples: e.get_or("planted_examples", d.num_examples)?,
                    num_fields: e.get_or("planted_fields", d.num_fields)?,
                    vocab_per_field: e.get_or("planted_vocab", d.vocab_per_field)?,
                    seed,
                    ..d
                })
            }
            other => {
                return Err(Error::Config(format!(
                    "source {other:?} is not one of prepared, raw, bookcrossing, planted"
                )))
            }
        };

        let md = ModelConfig::default();
        let sk = SkConfig::default();
        let model = ModelConfig {
            variant: e.get_or::<Variant>("variant", md.variant)?,
            embedding_dim: e.get_or("embedding_dim", md.embedding_dim)?,
            hidden_sizes: e.list("hidden_sizes")?.unwrap_or(md.hidden_sizes),
            dropout: e.get_or("dropout", md.dropout)?,
            sk: SkConfig {
                reduction_ratio: e.get_or("reduction_ratio", sk.reduction_ratio)?,
                min_reduced_dim: e.get_or("min_reduced_dim", sk.min_reduced_dim)?,
                pooling: e.get_or::<Pooling>("pooling", sk.pooling)?,
            },
        };
        let td = TrainConfig::default();
        let train = TrainConfig {
            batch_size: e.get_or("batch_size", td.batch_size)?,
            learning_rate: e.get_or("learning_rate", td.learning_rate)?,
            weight_decay: e.get_or("weight_decay", td.weight_decay)?,
            max_epochs: e.get_or("max_epochs", td.max_epochs)?,
            patience: e.get_or("patience", td.patience)?,
            deterministic: e.get_or("deterministic", td.deterministic)?,
            seed,
        };
        let gd = GradCheckOptions::default();
        let gradcheck = GradCheckOptions {
            eps: e.get_or("gradcheck_eps", gd.eps)?,
            max_coords_per_group: e.get_or("gradcheck_max_coords", gd.max_coords_per_group)?,
            seed,
        };
        Ok(Self {
            source,
            output_dir: resolve(e.raw("output_dir").unwrap_or("out")),
            model,
            train,
            gradcheck,
            gradcheck_threshold: e.get_or("gradcheck_threshold", 1e-4)?,
            gradcheck_examples: e.get_or("gradcheck_examples", 16)?,
        })
    }

    /// Input paths must exist and the output directory must be creatable,
    /// checked before any work starts.
    pub fn validate_paths(&self) -> Result<()> {
        let must_exist = |p: &Path, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, format!("{what} not found")),
                ))
            }
        };
        match &self.source {
            DataSource::Prepared { dir } => {
                must_exist(dir, "data_dir")?;
                must_exist(&dir.join(crate::ingest::VOCAB_FILE), "vocabulary")?;
                for f in crate::ingest::SPLIT_FILES {
                    must_exist(&dir.join(f), "split file")?;
                }
            }
            DataSource::Raw { input, .. } => must_exist(input, "input")?,
            DataSource::BookCrossing { dir, .. } => must_exist(dir, "Book-Crossing directory")?,
            DataSource::Planted(_) => {}
        }
        if self.output_dir.exists() && !self.output_dir.is_dir() {
            return Err(Error::Config(format!(
                "output_dir {} exists and is not a directory",
                self.output_dir.display()
            )));
        }
        Ok(())
    }
}
