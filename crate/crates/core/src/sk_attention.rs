//! Selective-kernel attention over the two cross branches.
//!
//! Fuse sums the branches, pools every channel to a scalar, and squeezes the
//! resulting length-`C` statistics into a length-`d` descriptor
//! `s = relu(Z · W_reduce)`. Select projects `s` back to two logits per
//! channel through the excite matrices `A` and `B` and normalizes each pair
//! with a two-way softmax, so `a_c + b_c = 1`. The output map is
//! `V_c = a_c · Ũ_c + b_c · Û_c`.
//!
//! Matrices are stored input-major: `W_reduce` is `[C, d]`, `A` and `B` are
//! `[d, C]`, so batched products are `rows · W`.

use std::fmt::Write as _;

use crate::crosses::{field_tuple, BranchTensor, ChannelLayout, CrossOrder};
use crate::engine::{ops, xavier_init, ParamKind, ParameterStore, Real, Tape, Tensor, Var};
use crate::error::{Error, Result};

pub const REDUCE: &str = "sk/reduce";
pub const EXCITE_A: &str = "sk/excite_a";
pub const EXCITE_B: &str = "sk/excite_b";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    Mean,
    Max,
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "max" => Ok(Pooling::Max),
            _ => Err(Error::Config(format!("unknown pooling {s:?} (mean|max)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkConfig {
    pub reduction_ratio: usize,
    pub min_reduced_dim: usize,
    pub pooling: Pooling,
}

impl Default for SkConfig {
    fn default() -> Self {
        Self {
            reduction_ratio: 3,
            min_reduced_dim: 8,
            pooling: Pooling::Mean,
        }
    }
}

/// `d = max(ceil(C / r), d_min)`.
pub fn reduced_dim(channels: usize, ratio: usize, min_dim: usize) -> usize {
    channels.div_ceil(ratio.max(1)).max(min_dim)
}

/// Registers the reduce matrix and the two excite matrices. `A` and `B` start
/// from the same draw, so every attention weight is exactly 0.5 before
/// training.
pub fn register_params<T: Real>(
    store: &mut ParameterStore<T>,
    channels: usize,
    cfg: &SkConfig,
    seed: u64,
) -> Result<usize> {
    let d = reduced_dim(channels, cfg.reduction_ratio, cfg.min_reduced_dim);
    store.register(
        REDUCE,
        xavier_init(&[channels, d], seed, REDUCE)?,
        ParamKind::Weight,
    )?;
    let excite: Tensor<T> = xavier_init(&[d, channels], seed, "sk/excite")?;
    store.register(EXCITE_A, excite.clone(), ParamKind::Weight)?;
    store.register(EXCITE_B, excite, ParamKind::Weight)?;
    Ok(d)
}

/// Fuse: `U = Ũ + Û`.
pub fn fuse_sum<T: Real>(second: &BranchTensor<T>, third: &BranchTensor<T>) -> Result<Tensor<T>> {
    if second.order != CrossOrder::Second || third.order != CrossOrder::Third {
        return Err(Error::Model(
            "fuse_sum expects (second, third) branches".into(),
        ));
    }
    ops::add(&second.values, &third.values)
}

/// `z_c = mean_t U[c, t]` for a single `C × k` map.
pub fn global_mean_pool<T: Real>(fused: &Tensor<T>) -> Result<Tensor<T>> {
    let [c, k] = *fused.shape() else {
        return Err(Error::shape("global_mean_pool", fused.shape(), &[0, 0]));
    };
    let z = ops::mean_last(&fused.clone().reshape(&[1, c, k])?)?;
    z.reshape(&[c])
}

/// `s = relu(Z · W_reduce)`, length `d`.
pub fn reduce<T: Real>(stats: &Tensor<T>, w_reduce: &Tensor<T>) -> Result<Tensor<T>> {
    let c = stats.len();
    let row = stats.clone().reshape(&[1, c])?;
    let s = ops::matmul(&row, w_reduce)?;
    let d = s.len();
    s.map(ops::relu).reshape(&[d])
}

/// Per-channel two-way softmax of `(s · A, s · B)`.
pub fn select_softmax<T: Real>(
    s: &Tensor<T>,
    a: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    if a.shape() != b.shape() {
        return Err(Error::shape("select_softmax", a.shape(), b.shape()));
    }
    let row = s.clone().reshape(&[1, s.len()])?;
    let la = ops::matmul(&row, a)?;
    let lb = ops::matmul(&row, b)?;
    if !la.is_finite() || !lb.is_finite() {
        return Err(Error::NonFinite("select_softmax logits".into()));
    }
    Ok(la
        .data()
        .iter()
        .zip(lb.data())
        .map(|(&x, &y)| ops::pair_softmax(x, y))
        .unzip())
}

/// Select: `V_c = a_c · Ũ_c + b_c · Û_c` on a single example.
pub fn apply_select<T: Real>(
    second: &Tensor<T>,
    third: &Tensor<T>,
    a: &[T],
    b: &[T],
) -> Result<Tensor<T>> {
    let [c, k] = *second.shape() else {
        return Err(Error::shape("apply_select", second.shape(), &[0, 0]));
    };
    if third.shape() != second.shape() || a.len() != c || b.len() != c {
        return Err(Error::shape("apply_select", second.shape(), third.shape()));
    }
    let tol = T::from_f64_lossy(1e-5);
    if let Some(ch) = (0..c).find(|&i| (a[i] + b[i] - T::one()).abs() > tol) {
        return Err(Error::Model(format!(
            "attention weights of channel {ch} do not sum to 1"
        )));
    }
    let mut out = Tensor::zeros(&[c, k]);
    for ch in 0..c {
        for t in 0..k {
            out.data_mut()[ch * k + t] =
                a[ch] * second.data()[ch * k + t] + b[ch] * third.data()[ch * k + t];
        }
    }
    Ok(out)
}

/// Tape nodes produced by the batched SK layer.
#[derive(Debug, Clone, Copy)]
pub struct SkNodes {
    /// `[B, C, k]` attention-weighted map.
    pub output: Var,
    /// `[B, C]` second-branch weights `a`.
    pub weight_second: Var,
    /// `[B, C]` third-branch weights `b = 1 - a`.
    pub weight_third: Var,
}

/// Batched Fuse + Select over `[B, C, k]` branch tensors.
pub fn sk_on_tape<T: Real>(
    tape: &mut Tape<'_, T>,
    second: Var,
    third: Var,
    pooling: Pooling,
) -> Result<SkNodes> {
    let fused = tape.add(second, third)?;
    let stats = match pooling {
        Pooling::Mean => tape.mean_last(fused)?,
        Pooling::Max => tape.max_last(fused)?,
    };
    let w_reduce = tape.param(REDUCE)?;
    let pre = tape.matmul(stats, w_reduce)?;
    let s = tape.relu(pre)?;
    let ea = tape.param(EXCITE_A)?;
    let eb = tape.param(EXCITE_B)?;
    let la = tape.matmul(s, ea)?;
    let lb = tape.matmul(s, eb)?;
    let a = tape.pair_softmax(la, lb)?;
    let b = tape.one_minus(a)?;
    let va = tape.scale_channels(second, a)?;
    let vb = tape.scale_channels(third, b)?;
    let output = tape.add(va, vb)?;
    Ok(SkNodes {
        output,
        weight_second: a,
        weight_third: b,
    })
}

/// One row of an attention report.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWeight {
    pub channel: usize,
    pub order: CrossOrder,
    pub fields: Vec<usize>,
    pub weight_before: f64,
    pub weight_after: f64,
}

/// Mean effective branch weight per channel before and after training. The
/// effective weight of a pair channel is `a_c`; of a triple channel, `b_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionReport {
    pub field_names: Vec<String>,
    pub rows: Vec<ChannelWeight>,
}

impl AttentionReport {
    /// Builds the report from per-channel mean effective weights.
    pub fn from_weights(
        layout: &ChannelLayout,
        field_names: Vec<String>,
        before: &[f64],
        after: &[f64],
    ) -> Result<Self> {
        let c = layout.num_channels();
        if before.len() != c || after.len() != c {
            return Err(Error::Model(format!(
                "attention report needs {c} weights, got {}/{}",
                before.len(),
                after.len()
            )));
        }
        let rows = (0..c)
            .map(|ch| {
                let (order, fields) = layout.channel(ch).expect("channel in range");
                ChannelWeight {
                    channel: ch,
                    order,
                    fields,
                    weight_before: before[ch],
                    weight_after: after[ch],
                }
            })
            .collect();
        Ok(Self { field_names, rows })
    }

    /// Tab-separated: `channel_index, order, field_tuple, weight_before, weight_after`.
    pub fn to_tsv(&self) -> String {
        let mut out =
            String::from("channel_index\torder\tfield_tuple\tweight_before\tweight_after\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}",
                r.channel,
                r.order.as_u8(),
                field_tuple(&r.fields, &self.field_names),
                r.weight_before,
                r.weight_after
            );
        }
        out
    }

    pub fn pair_weights_after(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.order == CrossOrder::Second)
            .map(|r| r.weight_after)
            .collect()
    }
}
