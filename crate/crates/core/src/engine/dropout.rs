use rand::Rng;

use crate::engine::init::rng_for;
use crate::engine::real::{lit, Real};
use crate::engine::tape::{Tape, Var};
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub fn dropout_mask<T: Real>(
    shape: &[usize],
    rate: f64,
    seed: u64,
    label: &str,
) -> Result<Tensor<T>> {
    check_rate(rate)?;
    let keep = lit::<T>(1.0 / (1.0 - rate));
    let mut rng = rng_for(seed, label);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    Tensor::new(shape, data)
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

/// Applies dropout to a plain tensor; identity outside training or at rate 0.
pub fn dropout_apply<T: Real>(
    x: &Tensor<T>,
    rate: f64,
    training: bool,
    seed: u64,
) -> Result<Tensor<T>> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.shape(), rate, seed, "dropout")?;
    crate::engine::ops::hadamard(x, &mask)
}

/// Records dropout on a tape as a product with a constant mask.
pub fn dropout_on_tape<T: Real>(
    tape: &mut Tape<'_, T>,
    x: Var,
    rate: f64,
    seed: u64,
    label: &str,
) -> Result<Var> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(x);
    }
    let mask = dropout_mask(tape.value(x).shape(), rate, seed, label)?;
    let m = tape.constant(mask)?;
    tape.hadamard(x, m)
}
