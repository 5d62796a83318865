use std::collections::BTreeMap;
use std::sync::Arc;

use crate::crosses::{branch_on_tape, ChannelLayout, CrossOrder};
use crate::engine::{
    derive_seed, dropout_on_tape, xavier_init, Checkpoint, GradientStore, ParamKind,
    ParameterStore, Real, Tape, Tensor, Var,
};
use crate::error::{Error, Result};
use crate::ingest::{EncodedExample, FieldSchema};
use crate::network::Variant;
use crate::sk_attention::{self, Pooling, SkConfig, SkNodes};

pub const LINEAR_BIAS: &str = "linear/bias";
pub const DNN_HEAD: &str = "dnn/head";

fn linear_name(field: usize) -> String {
    format!("linear/{field}")
}

fn embedding_name(field: usize) -> String {
    format!("embedding/{field}")
}

fn dnn_names(layer: usize) -> (String, String) {
    (format!("dnn/{layer}/weight"), format!("dnn/{layer}/bias"))
}

/// Rows evaluated per forward pass outside training.
const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub embedding_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub dropout: f64,
    pub sk: SkConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::FiiNet,
            embedding_dim: 32,
            hidden_sizes: vec![128, 64],
            dropout: 0.2,
            sk: SkConfig::default(),
        }
    }
}

/// Whether a forward pass applies dropout, and with which mask seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

/// A minibatch in the layout the tape consumes.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub indices: Arc<Vec<usize>>,
    pub labels: Vec<T>,
}

impl<T: Real> Batch<T> {
    pub fn new(examples: &[&EncodedExample]) -> Self {
        Self {
            indices: Arc::new(
                examples
                    .iter()
                    .flat_map(|e| e.indices.iter().copied())
                    .collect(),
            ),
            labels: examples
                .iter()
                .map(|e| T::from_f64_lossy(e.label as f64))
                .collect(),
        }
    }

    pub fn from_slice(examples: &[EncodedExample]) -> Self {
        let refs: Vec<&EncodedExample> = examples.iter().collect();
        Self::new(&refs)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Nodes of one recorded forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardNodes {
    /// `[B, 1]` predicted click probabilities.
    pub prob: Var,
    pub attention: Option<SkNodes>,
}

/// A CTR model: parameters plus the structure the forward pass follows.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    config: ModelConfig,
    schema: Vec<FieldSchema>,
    layout: Option<ChannelLayout>,
    params: ParameterStore<T>,
}

impl<T: Real> Model<T> {
    /// Builds and initializes the requested variant for `schema`.
    pub fn new(config: ModelConfig, schema: &[FieldSchema], seed: u64) -> Result<Self> {
        let variant = config.variant;
        let f = schema.len();
        if f < variant.min_fields() {
            return Err(Error::Model(format!(
                "{variant} needs at least {} fields, schema has {f}",
                variant.min_fields()
            )));
        }
        if schema
            .iter()
            .enumerate()
            .any(|(i, s)| s.index != i || s.cardinality < 2)
        {
            return Err(Error::Model(
                "schema indices must be 0..f with cardinality >= 2".into(),
            ));
        }
        if variant.has_dnn() && config.hidden_sizes.is_empty() {
            return Err(Error::Model(format!(
                "{variant} needs at least one hidden layer"
            )));
        }
        if config.embedding_dim == 0 || config.hidden_sizes.contains(&0) {
            return Err(Error::Model("zero-width layer".into()));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                config.dropout
            )));
        }
        let k = config.embedding_dim;
        let layout = match variant {
            Variant::Lr => None,
            Variant::Fm => Some(ChannelLayout::new(f, true, false)?),
            v => Some(ChannelLayout::new(
                f,
                v.uses_second_order(),
                v.uses_third_order(),
            )?),
        };

        let mut params = ParameterStore::new();
        params.register(LINEAR_BIAS, Tensor::zeros(&[1]), ParamKind::Bias)?;
        for (i, s) in schema.iter().enumerate() {
            params.register(
                &linear_name(i),
                Tensor::zeros(&[s.cardinality, 1]),
                ParamKind::Weight,
            )?;
        }
        if variant.has_embeddings() {
            for (i, s) in schema.iter().enumerate() {
                let name = embedding_name(i);
                let t = xavier_init(&[s.cardinality, k], seed, &name)?;
                params.register(&name, t, ParamKind::Weight)?;
            }
        }
        if variant.has_sk() {
            let c = layout.as_ref().map_or(0, ChannelLayout::num_channels);
            sk_attention::register_params(&mut params, c, &config.sk, seed)?;
        }
        if variant.has_dnn() {
            let mut width = layout.as_ref().map_or(0, ChannelLayout::num_channels) * k;
            for (l, &h) in config.hidden_sizes.iter().enumerate() {
                let (w, b) = dnn_names(l);
                params.register(&w, xavier_init(&[width, h], seed, &w)?, ParamKind::Weight)?;
                params.register(&b, Tensor::zeros(&[h]), ParamKind::Bias)?;
                width = h;
            }
            params.register(
                DNN_HEAD,
                xavier_init(&[width, 1], seed, DNN_HEAD)?,
                ParamKind::Weight,
            )?;
        }
        Ok(Self {
            config,
            schema: schema.to_vec(),
            layout,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn schema(&self) -> &[FieldSchema] {
        &self.schema
    }

    pub fn field_names(&self) -> Vec<String> {
        self.schema.iter().map(|s| s.name.clone()).collect()
    }

    /// Cross channel layout; `None` for LR.
    pub fn layout(&self) -> Option<&ChannelLayout> {
        self.layout.as_ref()
    }

    pub fn params(&self) -> &ParameterStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore<T> {
        &mut self.params
    }

    /// Width of the flattened cross map entering the DNN (`C · k`).
    pub fn dnn_input_width(&self) -> usize {
        if !self.variant().has_dnn() {
            return 0;
        }
        self.layout.as_ref().map_or(0, ChannelLayout::num_channels) * self.config.embedding_dim
    }

    /// Same structure and parameters at another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            schema: self.schema.clone(),
            layout: self.layout.clone(),
            params: self.params.cast(),
        }
    }

    pub fn with_params(&self, params: ParameterStore<T>) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::Model("parameter store does not match model".into()));
        }
        for (name, p) in params.iter() {
            match self.params.get(name) {
                Some(t) if t.shape() == p.value.shape() => {}
                _ => {
                    return Err(Error::Model(format!(
                        "parameter {name:?} does not match model"
                    )))
                }
            }
        }
        Ok(Self {
            params,
            ..self.clone()
        })
    }

    /// Records the forward pass for `batch` on `tape`.
    pub fn forward(
        &self,
        tape: &mut Tape<'_, T>,
        batch: &Batch<T>,
        mode: Mode,
    ) -> Result<ForwardNodes> {
        let f = self.schema.len();
        if batch.is_empty() || batch.indices.len() != batch.len() * f {
            return Err(Error::Data(format!(
                "batch of {} rows does not match {f} fields",
                batch.len()
            )));
        }
        let b = batch.len();
        let k = self.config.embedding_dim;

        let lin_tables = (0..f)
            .map(|i| tape.param(&linear_name(i)))
            .collect::<Result<Vec<_>>>()?;
        let lin = tape.lookup(&lin_tables, batch.indices.clone())?;
        let lin = tape.reshape(lin, &[b, f])?;
        let lin = tape.row_sum(lin)?;
        let w0 = tape.param(LINEAR_BIAS)?;
        let mut logit = tape.add_row_bias(lin, w0)?;

        let mut attention = None;
        if self.variant().has_embeddings() {
            let layout = self
                .layout
                .as_ref()
                .expect("embedding variants have a layout");
            let tables = (0..f)
                .map(|i| tape.param(&embedding_name(i)))
                .collect::<Result<Vec<_>>>()?;
            let emb = tape.lookup(&tables, batch.indices.clone())?;
            let c = layout.num_channels();

            let y_d = match self.variant() {
                Variant::Fm => {
                    let pairs = branch_on_tape(tape, emb, layout, CrossOrder::Second)?;
                    let flat = tape.reshape(pairs, &[b, c * k])?;
                    tape.row_sum(flat)?
                }
                v => {
                    let v_map = match v {
                        Variant::FiiNet => {
                            let u2 = branch_on_tape(tape, emb, layout, CrossOrder::Second)?;
                            let u3 = branch_on_tape(tape, emb, layout, CrossOrder::Third)?;
                            let sk =
                                sk_attention::sk_on_tape(tape, u2, u3, self.config.sk.pooling)?;
                            attention = Some(sk);
                            sk.output
                        }
                        Variant::FiiNetSh => {
                            let u2 = branch_on_tape(tape, emb, layout, CrossOrder::Second)?;
                            let u3 = branch_on_tape(tape, emb, layout, CrossOrder::Third)?;
                            tape.add(u2, u3)?
                        }
                        Variant::FiiNetS => branch_on_tape(tape, emb, layout, CrossOrder::Third)?,
                        Variant::FiiNetH => branch_on_tape(tape, emb, layout, CrossOrder::Second)?,
                        Variant::Lr | Variant::Fm => unreachable!(),
                    };
                    let a0 = tape.reshape(v_map, &[b, c * k])?;
                    self.dnn_forward(tape, a0, mode)?
                }
            };
            logit = tape.add(logit, y_d)?;
        }
        let prob = tape.sigmoid(logit)?;
        Ok(ForwardNodes { prob, attention })
    }

    /// Hidden ReLU stack with dropout after each activation, then a linear
    /// head producing `[B, 1]`.
    pub fn dnn_forward(&self, tape: &mut Tape<'_, T>, a0: Var, mode: Mode) -> Result<Var> {
        let width = tape.value(a0).shape().get(1).copied().unwrap_or(0);
        if width != self.dnn_input_width() {
            return Err(Error::shape(
                "dnn_forward",
                tape.value(a0).shape(),
                &[0, self.dnn_input_width()],
            ));
        }
        let mut a = a0;
        for l in 0..self.config.hidden_sizes.len() {
            let (wn, bn) = dnn_names(l);
            let w = tape.param(&wn)?;
            let bias = tape.param(&bn)?;
            let z = tape.matmul(a, w)?;
            let z = tape.add_row_bias(z, bias)?;
            a = tape.relu(z)?;
            if let Mode::Train { seed } = mode {
                a = dropout_on_tape(tape, a, self.config.dropout, seed, &format!("dropout/{l}"))?;
            }
        }
        let head = tape.param(DNN_HEAD)?;
        tape.matmul(a, head)
    }

    /// Mean BCE loss of a batch and its exact parameter gradients.
    pub fn loss_and_grad(&self, batch: &Batch<T>, mode: Mode) -> Result<(f64, GradientStore<T>)> {
        let mut tape = Tape::new(&self.params);
        let nodes = self.forward(&mut tape, batch, mode)?;
        let loss = tape.bce(nodes.prob, &batch.labels)?;
        let value = tape.value(loss).item()?.to_f64().unwrap_or(f64::NAN);
        Ok((value, tape.backward(loss)?))
    }

    pub fn loss(&self, batch: &Batch<T>, mode: Mode) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let nodes = self.forward(&mut tape, batch, mode)?;
        let loss = tape.bce(nodes.prob, &batch.labels)?;
        Ok(tape.value(loss).item()?.to_f64().unwrap_or(f64::NAN))
    }

    /// Click probabilities with dropout disabled.
    pub fn predict_batch(&self, examples: &[EncodedExample]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(examples.len());
        for chunk in examples.chunks(EVAL_CHUNK) {
            let batch = Batch::from_slice(chunk);
            let mut tape = Tape::new(&self.params);
            let nodes = self.forward(&mut tape, &batch, Mode::Eval)?;
            out.extend(tape.value(nodes.prob).to_f64_vec());
        }
        Ok(out)
    }

    pub fn predict(&self, example: &EncodedExample) -> Result<f64> {
        Ok(self.predict_batch(std::slice::from_ref(example))?[0])
    }

    /// Mean effective attention weight per channel over `examples`:
    /// `a_c` on pair channels, `b_c` on triple channels.
    pub fn attention_weights(&self, examples: &[EncodedExample]) -> Result<Vec<f64>> {
        if !self.variant().has_sk() {
            return Err(Error::Model(format!(
                "{} has no attention layer",
                self.variant()
            )));
        }
        if examples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let layout = self.layout.as_ref().expect("FiiNet has a layout");
        let (c, c2) = (layout.num_channels(), layout.num_pairs());
        let mut sums = vec![0.0f64; c];
        for chunk in examples.chunks(EVAL_CHUNK) {
            let batch = Batch::from_slice(chunk);
            let mut tape = Tape::new(&self.params);
            let nodes = self.forward(&mut tape, &batch, Mode::Eval)?;
            let sk = nodes.attention.expect("FiiNet records attention");
            let a = tape.value(sk.weight_second);
            let bw = tape.value(sk.weight_third);
            for row in 0..chunk.len() {
                for (ch, s) in sums.iter_mut().enumerate() {
                    let w = if ch < c2 {
                        a.data()[row * c + ch]
                    } else {
                        bw.data()[row * c + ch]
                    };
                    *s += w.to_f64().unwrap_or(f64::NAN);
                }
            }
        }
        let n = examples.len() as f64;
        Ok(sums.into_iter().map(|s| s / n).collect())
    }

    /// Raw per-example `(a, b)` weights, `[B, C]` each, for inspection.
    pub fn attention_state(&self, examples: &[EncodedExample]) -> Result<(Tensor<T>, Tensor<T>)> {
        if !self.variant().has_sk() {
            return Err(Error::Model(format!(
                "{} has no attention layer",
                self.variant()
            )));
        }
        let batch = Batch::from_slice(examples);
        let mut tape = Tape::new(&self.params);
        let nodes = self.forward(&mut tape, &batch, Mode::Eval)?;
        let sk = nodes.attention.expect("FiiNet records attention");
        Ok((
            tape.value(sk.weight_second).clone(),
            tape.value(sk.weight_third).clone(),
        ))
    }

    pub fn checkpoint_meta(&self) -> BTreeMap<String, String> {
        let c = &self.config;
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut m = BTreeMap::new();
        m.insert("variant".into(), c.variant.name().into());
        m.insert("embedding_dim".into(), c.embedding_dim.to_string());
        m.insert("hidden_sizes".into(), join(&c.hidden_sizes));
        m.insert("dropout".into(), c.dropout.to_string());
        m.insert("reduction_ratio".into(), c.sk.reduction_ratio.to_string());
        m.insert("min_reduced_dim".into(), c.sk.min_reduced_dim.to_string());
        m.insert(
            "pooling".into(),
            match c.sk.pooling {
                Pooling::Mean => "mean",
                Pooling::Max => "max",
            }
            .into(),
        );
        m.insert(
            "cardinalities".into(),
            join(
                &self
                    .schema
                    .iter()
                    .map(|s| s.cardinality)
                    .collect::<Vec<_>>(),
            ),
        );
        m.insert("field_names".into(), self.field_names().join("\t"));
        m
    }

    pub fn to_checkpoint(&self) -> Checkpoint<T> {
        Checkpoint::from_store(&self.params, self.checkpoint_meta())
    }

    /// Rebuilds a model from a checkpoint's metadata and tensors.
    pub fn from_checkpoint(ck: &Checkpoint<T>) -> Result<Self> {
        let get = |k: &str| {
            ck.meta
                .get(k)
                .ok_or_else(|| Error::Checkpoint(format!("metadata key {k:?} missing")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("metadata {k:?} is not an integer")))
        };
        let list = |k: &str| -> Result<Vec<usize>> {
            let s = get(k)?;
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|x| {
                    x.parse()
                        .map_err(|_| Error::Checkpoint(format!("bad list in {k:?}")))
                })
                .collect()
        };
        let config = ModelConfig {
            variant: get("variant")?.parse()?,
            embedding_dim: num("embedding_dim")?,
            hidden_sizes: list("hidden_sizes")?,
            dropout: get("dropout")?
                .parse()
                .map_err(|_| Error::Checkpoint("bad dropout".into()))?,
            sk: SkConfig {
                reduction_ratio: num("reduction_ratio")?,
                min_reduced_dim: num("min_reduced_dim")?,
                pooling: get("pooling")?.parse()?,
            },
        };
        let cards = list("cardinalities")?;
        let names: Vec<&str> = get("field_names")?.split('\t').collect();
        if names.len() != cards.len() {
            return Err(Error::Checkpoint(
                "field names and cardinalities disagree".into(),
            ));
        }
        let schema: Vec<FieldSchema> = names
            .iter()
            .zip(&cards)
            .enumerate()
            .map(|(i, (n, &c))| FieldSchema {
                name: n.to_string(),
                index: i,
                cardinality: c,
            })
            .collect();
        let mut model = Model::new(config, &schema, 0)?;
        ck.restore_into(&mut model.params)?;
        Ok(model)
    }

    /// Seed for the dropout masks of one training step.
    pub fn step_seed(base: u64, epoch: usize, step: usize) -> u64 {
        derive_seed(base, &format!("step/{epoch}/{step}"))
    }
}
