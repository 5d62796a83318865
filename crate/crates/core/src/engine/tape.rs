//! Reverse-mode differentiation over whole-batch tensors.
//!
//! A [`Tape`] records every operation of one forward pass as a node holding
//! its output value. [`Tape::backward`] then walks the nodes in reverse and
//! accumulates exact gradients into a [`GradientStore`]. Parameter values are
//! borrowed from the [`ParameterStore`], so the store stays read-only while a
//! tape is alive.

use std::borrow::Cow;
use std::sync::Arc;

use crate::engine::ops;
use crate::engine::params::{GradientStore, ParameterStore};
use crate::engine::real::{lit, Real};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// One output channel of a [`Tape::product_gather`]: the channel index and the
/// input rows multiplied together to produce it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductGroup {
    pub channel: usize,
    pub rows: Vec<usize>,
}

enum Op<T> {
    Constant,
    Param(usize),
    Lookup {
        tables: Vec<Var>,
        indices: Arc<Vec<usize>>,
    },
    ProductGather {
        input: Var,
        groups: Arc<Vec<ProductGroup>>,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    MatMul(Var, Var),
    AddRowBias(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    MeanLast(Var),
    MaxLast(Var, Vec<usize>),
    RowSum(Var),
    SumAll(Var),
    Reshape(Var),
    PairSoftmax(Var, Var),
    OneMinus(Var),
    ScaleChannels(Var, Var),
    Bce {
        pred: Var,
        labels: Vec<T>,
    },
}

struct Node<'p, T: Real> {
    value: Cow<'p, Tensor<T>>,
    op: Op<T>,
}

pub struct Tape<'p, T: Real> {
    params: &'p ParameterStore<T>,
    nodes: Vec<Node<'p, T>>,
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new(params: &'p ParameterStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, name: &'static str) -> Result<Var> {
        value.ensure_finite(name)?;
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var> {
        self.push(value, Op::Constant, "constant")
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        let idx = self
            .params
            .index_of(name)
            .ok_or_else(|| Error::Model(format!("unknown parameter {name:?}")))?;
        self.nodes.push(Node {
            value: Cow::Borrowed(self.params.by_index(idx)),
            op: Op::Param(idx),
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Gathers rows of per-field tables: `indices` is row-major `[B, f]`,
    /// `tables[i]` is `[cardinality_i, k]`; the result is `[B, f, k]`.
    pub fn lookup(&mut self, tables: &[Var], indices: Arc<Vec<usize>>) -> Result<Var> {
        let f = tables.len();
        if f == 0 || !indices.len().is_multiple_of(f) || indices.is_empty() {
            return Err(Error::Model(format!(
                "lookup: {} indices for {f} tables",
                indices.len()
            )));
        }
        let k = self.value(tables[0]).shape()[1];
        for &t in tables {
            let s = self.value(t).shape();
            if s.len() != 2 || s[1] != k {
                return Err(Error::shape("lookup", s, &[0, k]));
            }
        }
        let batch = indices.len() / f;
        let mut out = Vec::with_capacity(batch * f * k);
        for (pos, &idx) in indices.iter().enumerate() {
            let table = self.value(tables[pos % f]);
            let card = table.shape()[0];
            if idx >= card {
                return Err(Error::Data(format!(
                    "index {idx} out of range for field {} (cardinality {card})",
                    pos % f
                )));
            }
            out.extend_from_slice(table.row(idx));
        }
        let value = Tensor::new(&[batch, f, k], out)?;
        self.push(
            value,
            Op::Lookup {
                tables: tables.to_vec(),
                indices,
            },
            "lookup",
        )
    }

    /// For `input [B, f, k]` builds `[B, channels, k]` where each group's
    /// channel holds the elementwise product of its input rows; channels not
    /// named by any group are zero.
    pub fn product_gather(
        &mut self,
        input: Var,
        groups: Arc<Vec<ProductGroup>>,
        channels: usize,
    ) -> Result<Var> {
        let x = self.value(input);
        let [b, f, k] = *x.shape() else {
            return Err(Error::shape("product_gather", x.shape(), &[0, 0, 0]));
        };
        for g in groups.iter() {
            if g.channel >= channels || g.rows.is_empty() || g.rows.iter().any(|&r| r >= f) {
                return Err(Error::Model(format!(
                    "product_gather: group {g:?} invalid for {f} rows, {channels} channels"
                )));
            }
        }
        let xd = x.data();
        let mut out = vec![T::zero(); b * channels * k];
        for e in 0..b {
            let base = e * f * k;
            for g in groups.iter() {
                let o =
                    &mut out[(e * channels + g.channel) * k..(e * channels + g.channel + 1) * k];
                let first = base + g.rows[0] * k;
                o.copy_from_slice(&xd[first..first + k]);
                for &r in &g.rows[1..] {
                    let row = &xd[base + r * k..base + (r + 1) * k];
                    for (ov, &rv) in o.iter_mut().zip(row) {
                        *ov = *ov * rv;
                    }
                }
            }
        }
        let value = Tensor::new(&[b, channels, k], out)?;
        self.push(value, Op::ProductGather { input, groups }, "product_gather")
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        f: fn(&Tensor<T>, &Tensor<T>) -> Result<Tensor<T>>,
        op: Op<T>,
        name: &'static str,
    ) -> Result<Var> {
        let v = f(self.value(a), self.value(b))?;
        self.push(v, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, ops::add, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, ops::sub, Op::Sub(a, b), "sub")
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, ops::hadamard, Op::Hadamard(a, b), "hadamard")
    }

    /// `x [B,n] · w [n,m]`.
    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        self.binary(x, w, ops::matmul, Op::MatMul(x, w), "matmul")
    }

    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        self.binary(
            x,
            bias,
            ops::add_row_bias,
            Op::AddRowBias(x, bias),
            "add_row_bias",
        )
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(ops::relu);
        self.push(v, Op::Relu(x), "relu")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(ops::sigmoid);
        self.push(v, Op::Sigmoid(x), "sigmoid")
    }

    pub fn mean_last(&mut self, x: Var) -> Result<Var> {
        let v = ops::mean_last(self.value(x))?;
        self.push(v, Op::MeanLast(x), "mean_last")
    }

    pub fn max_last(&mut self, x: Var) -> Result<Var> {
        let (v, arg) = ops::max_last(self.value(x))?;
        self.push(v, Op::MaxLast(x, arg), "max_last")
    }

    pub fn row_sum(&mut self, x: Var) -> Result<Var> {
        let v = ops::row_sum(self.value(x))?;
        self.push(v, Op::RowSum(x), "row_sum")
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let v = Tensor::scalar(self.value(x).sum());
        self.push(v, Op::SumAll(x), "sum_all")
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x).clone().reshape(shape)?;
        self.push(v, Op::Reshape(x), "reshape")
    }

    /// First output of the per-element two-way softmax over `(la, lb)`.
    pub fn pair_softmax(&mut self, la: Var, lb: Var) -> Result<Var> {
        let (x, y) = (self.value(la), self.value(lb));
        if x.shape() != y.shape() {
            return Err(Error::shape("pair_softmax", x.shape(), y.shape()));
        }
        let data = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(&a, &b)| ops::pair_softmax(a, b).0)
            .collect();
        let v = Tensor::new(x.shape(), data)?;
        self.push(v, Op::PairSoftmax(la, lb), "pair_softmax")
    }

    pub fn one_minus(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(|a| T::one() - a);
        self.push(v, Op::OneMinus(x), "one_minus")
    }

    /// `u [B,C,k]` with channel `(i,c)` scaled by `w[i,c]`.
    pub fn scale_channels(&mut self, u: Var, w: Var) -> Result<Var> {
        self.binary(
            u,
            w,
            ops::scale_channels,
            Op::ScaleChannels(u, w),
            "scale_channels",
        )
    }

    /// Mean binary cross-entropy of `pred [B,1]` against `labels`, with
    /// predictions clamped into `[1e-7, 1 - 1e-7]`.
    pub fn bce(&mut self, pred: Var, labels: &[T]) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != labels.len() {
            return Err(Error::shape("bce", p.shape(), &[labels.len(), 1]));
        }
        let n = lit::<T>(labels.len() as f64);
        let total: T = p
            .data()
            .iter()
            .zip(labels)
            .map(|(&p, &y)| {
                let p = ops::clamp_prob(p);
                -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
            })
            .sum();
        self.push(
            Tensor::scalar(total / n),
            Op::Bce {
                pred,
                labels: labels.to_vec(),
            },
            "bce",
        )
    }

    /// Exact gradients of the scalar node `loss` with respect to every
    /// parameter of the store; parameters the tape never touched get zeros.
    pub fn backward(&self, loss: Var) -> Result<GradientStore<T>> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::Model("backward called before forward".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward", self.value(loss).shape(), &[1]));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::ones(self.value(loss).shape()));
        let mut out = GradientStore::zeros_like(self.params);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            let mut send = |v: Var, t: Tensor<T>| -> Result<()> {
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&t),
                    slot @ None => {
                        *slot = Some(t);
                        Ok(())
                    }
                }
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(idx) => out.by_index_mut(*idx).add_assign(&g)?,
                Op::Lookup { tables, indices } => {
                    let f = tables.len();
                    let k = g.shape()[2];
                    let mut tg: Vec<Tensor<T>> = tables
                        .iter()
                        .map(|&t| Tensor::zeros(self.value(t).shape()))
                        .collect();
                    for (pos, &idx) in indices.iter().enumerate() {
                        let src = &g.data()[pos * k..(pos + 1) * k];
                        let dst = &mut tg[pos % f].data_mut()[idx * k..(idx + 1) * k];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    }
                    for (&t, gt) in tables.iter().zip(tg) {
                        send(t, gt)?;
                    }
                }
                Op::ProductGather { input, groups } => {
                    let x = self.value(*input);
                    let [b, f, k] = *x.shape() else {
                        unreachable!()
                    };
                    let channels = g.shape()[1];
                    let xd = x.data();
                    let mut gx = vec![T::zero(); b * f * k];
                    for e in 0..b {
                        let base = e * f * k;
                        for grp in groups.iter() {
                            let go = &g.data()[(e * channels + grp.channel) * k..][..k];
                            for (i, &ri) in grp.rows.iter().enumerate() {
                                for t in 0..k {
                                    let mut prod = go[t];
                                    for (j, &rj) in grp.rows.iter().enumerate() {
                                        if j != i {
                                            prod = prod * xd[base + rj * k + t];
                                        }
                                    }
                                    gx[base + ri * k + t] = gx[base + ri * k + t] + prod;
                                }
                            }
                        }
                    }
                    send(*input, Tensor::new(x.shape(), gx)?)?;
                }
                Op::Add(a, b) => {
                    send(*a, g.clone())?;
                    send(*b, g)?;
                }
                Op::Sub(a, b) => {
                    send(*b, g.map(|v| -v))?;
                    send(*a, g)?;
                }
                Op::Hadamard(a, b) => {
                    send(*a, ops::hadamard(&g, self.value(*b))?)?;
                    send(*b, ops::hadamard(&g, self.value(*a))?)?;
                }
                Op::MatMul(x, w) => {
                    send(*x, ops::matmul_transpose_b(&g, self.value(*w))?)?;
                    send(*w, ops::matmul_transpose_a(self.value(*x), &g)?)?;
                }
                Op::AddRowBias(x, bias) => {
                    let m = g.shape()[1];
                    let mut gb = Tensor::zeros(&[m]);
                    for row in g.data().chunks_exact(m) {
                        for (d, &s) in gb.data_mut().iter_mut().zip(row) {
                            *d = *d + s;
                        }
                    }
                    send(*bias, gb)?;
                    send(*x, g)?;
                }
                Op::Relu(x) => {
                    let d = self.value(*x).map(ops::relu_grad);
                    send(*x, ops::hadamard(&g, &d)?)?;
                }
                Op::Sigmoid(x) => {
                    let d = node.value.map(ops::sigmoid_grad_from_output);
                    send(*x, ops::hadamard(&g, &d)?)?;
                }
                Op::MeanLast(x) => {
                    let shape = self.value(*x).shape();
                    let k = shape[2];
                    let inv = T::one() / lit::<T>(k as f64);
                    let data = g
                        .data()
                        .iter()
                        .flat_map(|&v| std::iter::repeat_n(v * inv, k))
                        .collect();
                    send(*x, Tensor::new(shape, data)?)?;
                }
                Op::MaxLast(x, arg) => {
                    let shape = self.value(*x).shape();
                    let k = shape[2];
                    let mut gx = Tensor::zeros(shape);
                    for (slot, (&v, &a)) in g.data().iter().zip(arg).enumerate() {
                        gx.data_mut()[slot * k + a] = v;
                    }
                    send(*x, gx)?;
                }
                Op::RowSum(x) => {
                    let shape = self.value(*x).shape();
                    let m = shape[1];
                    let data = g
                        .data()
                        .iter()
                        .flat_map(|&v| std::iter::repeat_n(v, m))
                        .collect();
                    send(*x, Tensor::new(shape, data)?)?;
                }
                Op::SumAll(x) => {
                    let gv = g.data()[0];
                    send(*x, Tensor::full(self.value(*x).shape(), gv))?;
                }
                Op::Reshape(x) => {
                    let shape = self.value(*x).shape().to_vec();
                    send(*x, g.reshape(&shape)?)?;
                }
                Op::PairSoftmax(la, lb) => {
                    let d = node.value.map(|a| a * (T::one() - a));
                    let ga = ops::hadamard(&g, &d)?;
                    send(*lb, ga.map(|v| -v))?;
                    send(*la, ga)?;
                }
                Op::OneMinus(x) => send(*x, g.map(|v| -v))?,
                Op::ScaleChannels(u, w) => {
                    let uv = self.value(*u);
                    let k = uv.shape()[2];
                    let gw: Vec<T> = g
                        .data()
                        .chunks_exact(k)
                        .zip(uv.data().chunks_exact(k))
                        .map(|(gc, uc)| gc.iter().zip(uc).map(|(&a, &b)| a * b).sum())
                        .collect();
                    send(*w, Tensor::new(self.value(*w).shape(), gw)?)?;
                    send(*u, ops::scale_channels(&g, self.value(*w))?)?;
                }
                Op::Bce { pred, labels } => {
                    let p = self.value(*pred);
                    let n = lit::<T>(labels.len() as f64);
                    let eps = lit::<T>(ops::PROB_EPS);
                    let gl = g.data()[0];
                    let data = p
                        .data()
                        .iter()
                        .zip(labels)
                        .map(|(&p, &y)| {
                            if p < eps || p > T::one() - eps {
                                T::zero()
                            } else {
                                gl * ((T::one() - y) / (T::one() - p) - y / p) / n
                            }
                        })
                        .collect();
                    send(*pred, Tensor::new(p.shape(), data)?)?;
                }
            }
        }
        for (name, g) in out.iter() {
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
        }
        Ok(out)
    }
}
