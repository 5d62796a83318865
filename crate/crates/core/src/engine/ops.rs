//! Primitive tensor operations.
//!
//! These are plain functions over [`Tensor`]; the [`Tape`](super::Tape)
//! records them and supplies the reverse-mode rules. Gradient rules that are
//! themselves products (e.g. `dL/dW = xᵀ·g`) are expressed with the
//! transposed-operand variants of `matmul` below.

use crate::engine::real::{lit, Real};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

/// Probability clamp used wherever a sigmoid output meets a logarithm.
pub const PROB_EPS: f64 = 1e-7;

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

fn dims2<T: Real>(t: &Tensor<T>, op: &'static str) -> Result<(usize, usize)> {
    match *t.shape() {
        [r, c] => Ok((r, c)),
        _ => Err(Error::shape(op, t.shape(), &[0, 0])),
    }
}

fn dims3<T: Real>(t: &Tensor<T>, op: &'static str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(Error::shape(op, t.shape(), &[0, 0, 0])),
    }
}

/// `a [m,n] · b [n,p] -> [m,p]`.
pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = dims2(a, "matmul")?;
    let (n2, p) = dims2(b, "matmul")?;
    if n != n2 {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let mut out = vec![T::zero(); m * p];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let orow = &mut out[i * p..(i + 1) * p];
        for (k, &aik) in ad[i * n..(i + 1) * n].iter().enumerate() {
            if aik != T::zero() {
                axpy(aik, &bd[k * p..(k + 1) * p], orow);
            }
        }
    }
    Tensor::new(&[m, p], out)
}

/// `g [m,p] · bᵀ` where `b` is `[n,p]`, giving `[m,n]`.
pub fn matmul_transpose_b<T: Real>(g: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, p) = dims2(g, "matmul_transpose_b")?;
    let (_, p2) = dims2(b, "matmul_transpose_b")?;
    if p != p2 {
        return Err(Error::shape("matmul_transpose_b", g.shape(), b.shape()));
    }
    matmul(g, &transpose(b)?)
}

/// `aᵀ · g` where `a` is `[m,n]` and `g` is `[m,p]`, giving `[n,p]`.
pub fn matmul_transpose_a<T: Real>(a: &Tensor<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = dims2(a, "matmul_transpose_a")?;
    let (m2, p) = dims2(g, "matmul_transpose_a")?;
    if m != m2 {
        return Err(Error::shape("matmul_transpose_a", a.shape(), g.shape()));
    }
    let mut out = vec![T::zero(); n * p];
    let (ad, gd) = (a.data(), g.data());
    for i in 0..m {
        let grow = &gd[i * p..(i + 1) * p];
        for (k, &aik) in ad[i * n..(i + 1) * n].iter().enumerate() {
            if aik != T::zero() {
                axpy(aik, grow, &mut out[k * p..(k + 1) * p]);
            }
        }
    }
    Tensor::new(&[n, p], out)
}

/// `W [m,n] · x [n] -> [m]`.
pub fn matvec<T: Real>(w: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = dims2(w, "matvec")?;
    if x.shape() != [n] {
        return Err(Error::shape("matvec", w.shape(), x.shape()));
    }
    let out = (0..m)
        .map(|i| {
            w.row(i)
                .iter()
                .zip(x.data())
                .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
        })
        .collect();
    Tensor::new(&[m], out)
}

pub fn transpose<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = dims2(a, "transpose")?;
    let mut out = vec![T::zero(); m * n];
    let d = a.data();
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = d[i * n + j];
        }
    }
    Tensor::new(&[n, m], out)
}

fn zip_with<T: Real>(
    op: &'static str,
    u: &Tensor<T>,
    v: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    if u.shape() != v.shape() {
        return Err(Error::shape(op, u.shape(), v.shape()));
    }
    let data = u
        .data()
        .iter()
        .zip(v.data())
        .map(|(&a, &b)| f(a, b))
        .collect();
    Tensor::new(u.shape(), data)
}

pub fn add<T: Real>(u: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    zip_with("add", u, v, |a, b| a + b)
}

pub fn sub<T: Real>(u: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    zip_with("sub", u, v, |a, b| a - b)
}

/// Elementwise product.
pub fn hadamard<T: Real>(u: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    zip_with("hadamard", u, v, |a, b| a * b)
}

/// Three-operand elementwise product.
pub fn hadamard3<T: Real>(u: &Tensor<T>, v: &Tensor<T>, w: &Tensor<T>) -> Result<Tensor<T>> {
    hadamard(&hadamard(u, v)?, w)
}

pub fn scale<T: Real>(u: &Tensor<T>, alpha: T) -> Tensor<T> {
    u.map(|v| v * alpha)
}

#[inline]
pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Derivative of the sigmoid expressed through its output.
#[inline]
pub fn sigmoid_grad_from_output<T: Real>(s: T) -> T {
    s * (T::one() - s)
}

#[inline]
pub fn relu<T: Real>(z: T) -> T {
    if z > T::zero() {
        z
    } else {
        T::zero()
    }
}

/// Subgradient of relu; 0 at the kink.
#[inline]
pub fn relu_grad<T: Real>(z: T) -> T {
    if z > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// Two-way softmax over a pair of logits with max-logit subtraction.
#[inline]
pub fn pair_softmax<T: Real>(la: T, lb: T) -> (T, T) {
    let m = la.max(lb);
    let ea = (la - m).exp();
    let eb = (lb - m).exp();
    let s = ea + eb;
    (ea / s, eb / s)
}

/// Clamp a probability into `[PROB_EPS, 1 - PROB_EPS]`.
#[inline]
pub fn clamp_prob<T: Real>(p: T) -> T {
    let eps = lit::<T>(PROB_EPS);
    p.max(eps).min(T::one() - eps)
}

/// Adds a length-`m` bias to every row of `x [B,m]`.
pub fn add_row_bias<T: Real>(x: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, m) = dims2(x, "add_row_bias")?;
    if bias.shape() != [m] {
        return Err(Error::shape("add_row_bias", x.shape(), bias.shape()));
    }
    let mut out = x.clone();
    for r in 0..b {
        for (o, &bv) in out.data_mut()[r * m..(r + 1) * m]
            .iter_mut()
            .zip(bias.data())
        {
            *o = *o + bv;
        }
    }
    Ok(out)
}

/// Sums each row of `x [B,m]`, giving `[B,1]`.
pub fn row_sum<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, _) = dims2(x, "row_sum")?;
    let data = (0..b).map(|r| x.row(r).iter().copied().sum()).collect();
    Tensor::new(&[b, 1], data)
}

/// Mean over the last axis of `[B,C,k]`, giving `[B,C]`.
pub fn mean_last<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, c, k) = dims3(x, "mean_last")?;
    let inv = T::one() / lit::<T>(k as f64);
    let data = x
        .data()
        .chunks_exact(k)
        .map(|ch| ch.iter().copied().sum::<T>() * inv)
        .collect();
    Tensor::new(&[b, c], data)
}

/// Max over the last axis of `[B,C,k]` plus the argmax of each slice.
pub fn max_last<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let (b, c, k) = dims3(x, "max_last")?;
    let mut vals = Vec::with_capacity(b * c);
    let mut arg = Vec::with_capacity(b * c);
    for ch in x.data().chunks_exact(k) {
        let (i, v) =
            ch.iter().copied().enumerate().fold(
                (0, ch[0]),
                |best, (i, v)| if v > best.1 { (i, v) } else { best },
            );
        vals.push(v);
        arg.push(i);
    }
    Ok((Tensor::new(&[b, c], vals)?, arg))
}

/// Multiplies channel `c` of example `i` in `u [B,C,k]` by `w[i,c]`.
pub fn scale_channels<T: Real>(u: &Tensor<T>, w: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, c, k) = dims3(u, "scale_channels")?;
    if w.shape() != [b, c] {
        return Err(Error::shape("scale_channels", u.shape(), w.shape()));
    }
    let mut out = u.clone();
    for (ch, &wv) in out.data_mut().chunks_exact_mut(k).zip(w.data()) {
        ch.iter_mut().for_each(|v| *v = *v * wv);
    }
    Ok(out)
}
