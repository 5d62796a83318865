use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::cli::config::{DataSource, RunConfig};
use rand::Rng;

use crate::engine::init::rng_for;
use crate::engine::{finite_difference_check, Checkpoint, GradCheckReport};
use crate::error::{Error, Result};
use crate::ingest::{
    self, bookcrossing, DatasetSplit, FieldSchema, PrepareOptions, PreparedData, Table,
};
use crate::network::{make_variant, Batch, Mode, Model, ModelConfig, Variant};
use crate::sk_attention::AttentionReport;
use crate::synthetic::PlantedConfig;
use crate::training::{evaluate, train_with, Evaluation, TrainOutcome};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const LAYOUT_FILE: &str = "layout.tsv";
pub const ABLATION_FILE: &str = "ablation.tsv";
pub const SWEEP_FILE: &str = "sweep_k.tsv";
pub const ATTENTION_FILE: &str = "attention.tsv";

const GRADCHECK_JITTER: f64 = 0.3;

/// Embedding widths of the default dimension sweep.
pub const SWEEP_DIMS: [usize; 8] = [6, 12, 18, 24, 30, 36, 42, 48];

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn fmt_auc(e: &Evaluation) -> String {
    e.auc
        .map_or_else(|| "NA".to_string(), |a| format!("{a:.6}"))
}

/// Encoded examples plus the field layout they were encoded with.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub schema: Vec<FieldSchema>,
    pub split: DatasetSplit,
}

impl From<PreparedData> for LoadedData {
    fn from(p: PreparedData) -> Self {
        Self {
            schema: p.schema(),
            split: p.split,
        }
    }
}

pub fn load_data(source: &DataSource) -> Result<LoadedData> {
    let prepared = match source {
        DataSource::Prepared { dir } => ingest::read_prepared(dir)?,
        DataSource::Raw {
            input,
            delimiter,
            options,
        } => ingest::prepare(&Table::read(input, *delimiter)?, options)?,
        DataSource::BookCrossing {
            dir,
            loader,
            options,
        } => {
            let bx = bookcrossing::load(dir, loader)?;
            if bx.skipped_rows > 0 {
                log::warn!("skipped {} malformed Book-Crossing rows", bx.skipped_rows);
            }
            ingest::prepare(&bx.table, options)?
        }
        DataSource::Planted(p) => p.prepared()?,
    };
    Ok(prepared.into())
}

/// Column spec for `prepare`: `LABEL:FIELD,FIELD,...`, where a field written
/// `name#bins` is bucketized into that many quantile buckets.
pub fn parse_schema_spec(spec: &str, threshold: f64) -> Result<PrepareOptions> {
    let (label, fields) = spec.split_once(':').ok_or_else(|| {
        Error::Config(format!("schema {spec:?} must look like label:field,field"))
    })?;
    let mut opts = PrepareOptions::new(label.trim(), &[], threshold);
    for item in fields.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once('#') {
            Some((name, bins)) => {
                let bins = bins.parse().map_err(|_| {
                    Error::Config(format!("bucket count in {item:?} is not an integer"))
                })?;
                opts.fields.push(name.to_string());
                opts.bucketize.push((name.to_string(), bins));
            }
            None => opts.fields.push(item.to_string()),
        }
    }
    if label.trim().is_empty() || opts.fields.is_empty() {
        return Err(Error::Config(format!(
            "schema {spec:?} needs a label and at least one field"
        )));
    }
    Ok(opts)
}

#[derive(Debug, Clone)]
pub enum InputFormat {
    /// A delimited file with a header row.
    Delimited(u8),
    /// A directory holding the three Book-Crossing CSV files.
    BookCrossing,
}

#[derive(Debug, Clone)]
pub struct PrepareArgs {
    pub input: PathBuf,
    /// See [`parse_schema_spec`]. Optional for Book-Crossing input.
    pub schema: Option<String>,
    pub threshold: f64,
    pub out: PathBuf,
    pub format: InputFormat,
    pub seed: u64,
}

/// Runs the ingest pipeline and writes a prepared data directory.
pub fn cmd_prepare(args: &PrepareArgs, out: &mut dyn Write) -> Result<PreparedData> {
    if !args.input.exists() {
        return Err(Error::io(
            &args.input,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input not found"),
        ));
    }
    let mut opts = match (&args.schema, &args.format) {
        (Some(spec), _) => parse_schema_spec(spec, args.threshold)?,
        (None, InputFormat::BookCrossing) => {
            let mut o = bookcrossing::prepare_options(args.seed);
            o.threshold = args.threshold;
            o
        }
        (None, InputFormat::Delimited(_)) => {
            return Err(Error::Config(
                "--schema is required for delimited input".into(),
            ))
        }
    };
    opts.seed = args.seed;
    let table = match args.format {
        InputFormat::Delimited(d) => Table::read(&args.input, d)?,
        InputFormat::BookCrossing => bookcrossing::load(&args.input, &Default::default())?.table,
    };
    let data = ingest::prepare(&table, &opts)?;
    ingest::write_prepared(&args.out, &data)?;
    report_prepared(&data, out)?;
    Ok(data)
}

fn report_prepared(data: &PreparedData, out: &mut dyn Write) -> Result<()> {
    let s = &data.split;
    writeln!(out, "fields: {}", data.vocab.num_fields()).map_err(out_err)?;
    for f in data.schema() {
        writeln!(out, "  {}\t{}", f.name, f.cardinality).map_err(out_err)?;
    }
    writeln!(
        out,
        "examples: train {} valid {} test {}",
        s.train.len(),
        s.valid.len(),
        s.test.len()
    )
    .map_err(out_err)
}

/// Writes planted-interaction data as a prepared data directory.
pub fn cmd_synth(cfg: &PlantedConfig, dir: &Path, out: &mut dyn Write) -> Result<PreparedData> {
    let data = cfg.prepared()?;
    ingest::write_prepared(dir, &data)?;
    report_prepared(&data, out)?;
    Ok(data)
}

/// Trains one model of `model_cfg` and returns the best-validation state.
fn fit(
    cfg: &RunConfig,
    data: &LoadedData,
    model_cfg: &ModelConfig,
    mut on_record: impl FnMut(&crate::training::MetricRecord),
) -> Result<TrainOutcome<f32>> {
    let model = Model::<f32>::new(model_cfg.clone(), &data.schema, cfg.train.seed)?;
    train_with(model, &data.split, &cfg.train, &mut on_record)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub outcome: TrainOutcome<f32>,
    pub test: Evaluation,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
}

/// Trains the configured variant; writes the best checkpoint, the metric
/// log, and the channel layout into the output directory.
pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> Result<TrainSummary> {
    let data = load_data(&cfg.source)?;
    ensure_dir(&cfg.output_dir)?;
    let metrics_path = cfg.output_dir.join(METRICS_FILE);
    let mut log_file = fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut write_err = None;
    let outcome = fit(cfg, &data, &cfg.model, |r| {
        if write_err.is_none() {
            if let Err(e) = writeln!(log_file, "{}", r.to_json_line()) {
                write_err = Some(e);
            }
        }
        if r.split == "valid" {
            let _ = writeln!(
                out,
                "epoch {} valid auc {} logloss {:.6}",
                r.epoch,
                r.auc.map_or_else(|| "NA".into(), |a| format!("{a:.6}")),
                r.logloss
            );
        }
    })?;
    if let Some(e) = write_err {
        return Err(Error::io(&metrics_path, e));
    }

    let ck_path = cfg.output_dir.join(CHECKPOINT_FILE);
    outcome.model.to_checkpoint().save(&ck_path)?;
    if let Some(layout) = outcome.model.layout() {
        let names = outcome.model.field_names();
        write_file(&cfg.output_dir.join(LAYOUT_FILE), layout.to_tsv(&names)?)?;
    }
    let test = evaluate(&outcome.model, &data.split.test)?;
    writeln!(
        out,
        "{}: best epoch {} valid auc {} | test auc {} logloss {:.6}",
        outcome.model.variant().display_name(),
        outcome.best_epoch,
        fmt_auc(&outcome.best_valid),
        fmt_auc(&test),
        test.logloss
    )
    .map_err(out_err)?;
    Ok(TrainSummary {
        outcome,
        test,
        checkpoint: ck_path,
        metrics: metrics_path,
    })
}

/// Loads a checkpoint and checks it against the config and the data.
pub fn load_checked(cfg: &RunConfig, checkpoint: &Path, data: &LoadedData) -> Result<Model<f32>> {
    let model = Model::<f32>::from_checkpoint(&Checkpoint::load(checkpoint)?)?;
    let mc = model.config();
    if mc.variant != cfg.model.variant {
        return Err(Error::Config(format!(
            "checkpoint holds {} but config asks for {}",
            mc.variant, cfg.model.variant
        )));
    }
    if mc.embedding_dim != cfg.model.embedding_dim {
        return Err(Error::Config(format!(
            "checkpoint embedding_dim {} but config has {}",
            mc.embedding_dim, cfg.model.embedding_dim
        )));
    }
    let cards = |s: &[FieldSchema]| s.iter().map(|f| f.cardinality).collect::<Vec<_>>();
    if cards(model.schema()) != cards(&data.schema) {
        return Err(Error::Config(
            "checkpoint vocabulary does not match the data".into(),
        ));
    }
    Ok(model)
}

/// Validation and test metrics of a saved model.
pub fn cmd_eval(
    cfg: &RunConfig,
    checkpoint: &Path,
    out: &mut dyn Write,
) -> Result<(Evaluation, Evaluation)> {
    let data = load_data(&cfg.source)?;
    let model = load_checked(cfg, checkpoint, &data)?;
    let valid = evaluate(&model, &data.split.valid)?;
    let test = evaluate(&model, &data.split.test)?;
    writeln!(out, "split\tauc\tlogloss").map_err(out_err)?;
    for (name, e) in [("valid", &valid), ("test", &test)] {
        writeln!(out, "{name}\t{}\t{:.6}", fmt_auc(e), e.logloss).map_err(out_err)?;
    }
    Ok((valid, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub variant: Variant,
    pub embedding_dim: usize,
    pub best_epoch: usize,
    pub test: Evaluation,
}

fn comparison_tsv(rows: &[ComparisonRow], key: &str) -> String {
    let mut s = format!("{key}\ttest_auc\ttest_logloss\tbest_epoch\n");
    for r in rows {
        let k = if key == "variant" {
            r.variant.display_name().to_string()
        } else {
            r.embedding_dim.to_string()
        };
        s.push_str(&format!(
            "{k}\t{}\t{:.6}\t{}\n",
            fmt_auc(&r.test),
            r.test.logloss,
            r.best_epoch
        ));
    }
    s
}

fn train_row(cfg: &RunConfig, data: &LoadedData, model_cfg: &ModelConfig) -> Result<ComparisonRow> {
    let o = fit(cfg, data, model_cfg, |_| {})?;
    Ok(ComparisonRow {
        variant: model_cfg.variant,
        embedding_dim: model_cfg.embedding_dim,
        best_epoch: o.best_epoch,
        test: evaluate(&o.model, &data.split.test)?,
    })
}

/// Trains FiiNet and each requested variant with the shared seed and
/// writes the comparison table.
pub fn cmd_ablate(
    cfg: &RunConfig,
    variants: &[Variant],
    out: &mut dyn Write,
) -> Result<Vec<ComparisonRow>> {
    let data = load_data(&cfg.source)?;
    ensure_dir(&cfg.output_dir)?;
    let mut todo = vec![Variant::FiiNet];
    for &v in variants {
        if !todo.contains(&v) {
            todo.push(v);
        }
    }
    let mut rows = Vec::with_capacity(todo.len());
    for v in todo {
        let model_cfg = ModelConfig {
            variant: v,
            ..cfg.model.clone()
        };
        rows.push(train_row(cfg, &data, &model_cfg)?);
    }
    let table = comparison_tsv(&rows, "variant");
    write_file(&cfg.output_dir.join(ABLATION_FILE), &table)?;
    out.write_all(table.as_bytes()).map_err(out_err)?;
    Ok(rows)
}

/// Test AUC and logloss of the configured variant per embedding width.
pub fn cmd_sweep_k(
    cfg: &RunConfig,
    dims: &[usize],
    out: &mut dyn Write,
) -> Result<Vec<ComparisonRow>> {
    if dims.is_empty() {
        return Err(Error::Config("no embedding dimensions given".into()));
    }
    let data = load_data(&cfg.source)?;
    ensure_dir(&cfg.output_dir)?;
    let rows = dims
        .iter()
        .map(|&k| {
            let model_cfg = ModelConfig {
                embedding_dim: k,
                ..cfg.model.clone()
            };
            train_row(cfg, &data, &model_cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let table = comparison_tsv(&rows, "embedding_dim");
    write_file(&cfg.output_dir.join(SWEEP_FILE), &table)?;
    out.write_all(table.as_bytes()).map_err(out_err)?;
    Ok(rows)
}

/// Per-channel attention weights over the test split, for the model as
/// initialized from the config seed and as stored in the checkpoint.
pub fn cmd_export_attention(
    cfg: &RunConfig,
    checkpoint: &Path,
    out: &mut dyn Write,
) -> Result<AttentionReport> {
    let data = load_data(&cfg.source)?;
    let trained = load_checked(cfg, checkpoint, &data)?;
    let layout = trained
        .layout()
        .cloned()
        .filter(|_| trained.variant() == Variant::FiiNet)
        .ok_or_else(|| Error::Model(format!("{} has no attention layer", trained.variant())))?;
    let initial = Model::<f32>::new(trained.config().clone(), &data.schema, cfg.train.seed)?;
    let before = initial.attention_weights(&data.split.test)?;
    let after = trained.attention_weights(&data.split.test)?;
    let report = AttentionReport::from_weights(&layout, trained.field_names(), &before, &after)?;
    ensure_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join(ATTENTION_FILE), report.to_tsv())?;
    out.write_all(report.to_tsv().as_bytes()).map_err(out_err)?;
    Ok(report)
}

/// Finite-difference check of every parameter group of one variant at
/// 64-bit precision, on a fixed training minibatch with a fixed dropout mask.
///
/// Parameters get a small seeded jitter first. At initialization the two
/// attention logits are tied, which zeroes the reduce-layer gradient, and the
/// linear weights are exactly zero; the jitter moves off that point.
pub fn gradcheck_variant(
    cfg: &RunConfig,
    data: &LoadedData,
    variant: Variant,
) -> Result<GradCheckReport> {
    let n = cfg.gradcheck_examples.min(data.split.train.len()).max(1);
    let mut model = make_variant::<f64>(variant, &data.schema, &cfg.model, cfg.train.seed)?;
    let mut rng = rng_for(cfg.train.seed, "gradcheck/jitter");
    for (_, p) in model.params_mut().iter_mut() {
        for v in p.value.data_mut() {
            *v += rng.gen_range(-GRADCHECK_JITTER..GRADCHECK_JITTER);
        }
    }
    let batch = Batch::<f64>::from_slice(&data.split.train[..n]);
    let mode = Mode::Train {
        seed: Model::<f64>::step_seed(cfg.train.seed, 0, 0),
    };
    let (_, grads) = model.loss_and_grad(&batch, mode)?;
    finite_difference_check(
        model.params(),
        &grads,
        |p| model.with_params(p.clone())?.loss(&batch, mode),
        &cfg.gradcheck,
    )
}

/// Prints the max relative error per parameter group; fails when any group
/// exceeds the configured threshold.
pub fn cmd_gradcheck(
    cfg: &RunConfig,
    variants: &[Variant],
    out: &mut dyn Write,
) -> Result<Vec<(Variant, GradCheckReport)>> {
    let data = load_data(&cfg.source)?;
    let variants = if variants.is_empty() {
        vec![cfg.model.variant]
    } else {
        variants.to_vec()
    };
    writeln!(out, "variant\tgroup\tchecked\trefined\tmax_rel_error").map_err(out_err)?;
    let mut reports = Vec::new();
    let mut worst = 0.0f64;
    for v in variants {
        let report = gradcheck_variant(cfg, &data, v)?;
        for g in &report.groups {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.3e}",
                v.name(),
                g.name,
                g.checked,
                g.refined,
                g.max_rel_error
            )
            .map_err(out_err)?;
        }
        worst = worst.max(report.max_rel_error());
        reports.push((v, report));
    }
    writeln!(out, "max_rel_error\t{worst:.3e}").map_err(out_err)?;
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(worst < cfg.gradcheck_threshold) {
        return Err(Error::GradCheckFailed {
            max: worst,
            threshold: cfg.gradcheck_threshold,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_spec() {
        let o = parse_schema_spec("rating: user, age#10 ,isbn", 6.0).unwrap();
        assert_eq!(o.label_column, "rating");
        assert_eq!(o.fields, vec!["user", "age", "isbn"]);
        assert_eq!(o.bucketize, vec![("age".to_string(), 10)]);
        assert_eq!(o.threshold, 6.0);
        assert!(parse_schema_spec("rating", 6.0).is_err());
        assert!(parse_schema_spec("rating:", 6.0).is_err());
        assert!(parse_schema_spec("rating:age#x", 6.0).is_err());
    }
}
