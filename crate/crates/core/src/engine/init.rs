use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::real::Real;
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

/// Stable 64-bit mix of a base seed and a label (FNV-1a over the label, then
/// a splitmix finalizer). Used so every random stream in the crate is
/// reproducible from one seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(seed ^ splitmix(h))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}

/// Xavier/Glorot bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Uniform Xavier draw for a `(fan_in, fan_out)` matrix. Embedding tables use
/// `(cardinality, k)`. The stream depends only on `(shape, seed, name)`.
pub fn xavier_init<T: Real>(shape: &[usize], seed: u64, name: &str) -> Result<Tensor<T>> {
    let [fan_in, fan_out] = *shape else {
        return Err(Error::Model(format!(
            "xavier_init needs a 2-D shape, got {shape:?}"
        )));
    };
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::Model(format!(
            "xavier_init: zero dimension in {shape:?}"
        )));
    }
    let bound = xavier_bound(fan_in, fan_out);
    let mut rng = rng_for(seed, &format!("xavier/{name}/{fan_in}x{fan_out}"));
    let data = (0..fan_in * fan_out)
        .map(|_| T::from_f64_lossy(rng.gen_range(-bound..=bound)))
        .collect();
    Tensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_for_square() {
        assert_eq!(xavier_bound(3, 3), 1.0);
    }

    #[test]
    fn samples_within_bound_and_deterministic() {
        let a: Tensor<f64> = xavier_init(&[40, 25], 2023, "w").unwrap();
        let b: Tensor<f64> = xavier_init(&[40, 25], 2023, "w").unwrap();
        let c: Tensor<f64> = xavier_init(&[40, 25], 2023, "v").unwrap();
        let bound = xavier_bound(40, 25);
        assert!(a.data().iter().all(|v| v.abs() <= bound));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn monte_carlo_mean_near_zero() {
        let t: Tensor<f64> = xavier_init(&[1000, 100], 7, "mc").unwrap();
        let mean = t.sum() / t.len() as f64;
        assert!(mean.abs() < 0.01, "{mean}");
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(xavier_init::<f32>(&[0, 3], 1, "x").is_err());
        assert!(xavier_init::<f32>(&[3], 1, "x").is_err());
    }
}
