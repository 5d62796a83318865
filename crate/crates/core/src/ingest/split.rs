use rand::seq::SliceRandom;

use crate::engine::init::rng_for;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedExample {
    pub indices: Vec<usize>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<EncodedExample>,
    pub valid: Vec<EncodedExample>,
    pub test: Vec<EncodedExample>,
    pub split_seed: u64,
}

/// `1` iff `score > threshold`.
pub fn binarize_label(score: f64, threshold: f64) -> Result<u8> {
    if !score.is_finite() {
        return Err(Error::Data(format!("non-finite label score {score}")));
    }
    Ok(u8::from(score > threshold))
}

/// Seeded shuffle then contiguous partition. Train and validation sizes are
/// rounded from the ratios; test takes the remainder. Validation and test
/// each keep at least one example.
pub fn split_dataset(
    examples: Vec<EncodedExample>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit> {
    let (tr, va, te) = ratios;
    if [tr, va, te].iter().any(|r| !(r.is_finite() && *r > 0.0))
        || (tr + va + te - 1.0).abs() > 1e-9
    {
        return Err(Error::Config(format!(
            "split ratios must be positive and sum to 1, got ({tr}, {va}, {te})"
        )));
    }
    let n = examples.len();
    if n < 3 {
        return Err(Error::Data(format!(
            "need at least 3 examples to split, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, "split"));

    let n_valid = ((n as f64 * va).round() as usize).max(1);
    let n_train = ((n as f64 * tr).round() as usize)
        .min(n - n_valid - 1)
        .max(1);

    let mut slots: Vec<Option<EncodedExample>> = examples.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<EncodedExample> {
        idx.iter()
            .map(|&i| slots[i].take().expect("each index once"))
            .collect()
    };
    let train = take(&order[..n_train]);
    let valid = take(&order[n_train..n_train + n_valid]);
    let test = take(&order[n_train + n_valid..]);
    Ok(DatasetSplit {
        train,
        valid,
        test,
        split_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn examples(n: usize) -> Vec<EncodedExample> {
        (0..n)
            .map(|i| EncodedExample {
                indices: vec![i],
                label: (i % 2) as u8,
            })
            .collect()
    }

    #[test]
    fn labels() {
        assert_eq!(binarize_label(7.0, 6.0).unwrap(), 1);
        assert_eq!(binarize_label(6.0, 6.0).unwrap(), 0);
        assert_eq!(binarize_label(3.5, 3.0).unwrap(), 1);
        assert!(binarize_label(f64::NAN, 3.0).is_err());
        assert!(binarize_label(f64::INFINITY, 3.0).is_err());
    }

    #[test]
    fn ten_examples_8_1_1() {
        let s = split_dataset(examples(10), (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (8, 1, 1));
        assert_eq!(s, split_dataset(examples(10), (0.8, 0.1, 0.1), 7).unwrap());
    }

    #[test]
    fn invalid_inputs() {
        assert!(split_dataset(examples(10), (0.5, 0.5, 0.5), 7).is_err());
        assert!(split_dataset(examples(10), (1.0, 0.0, 0.0), 7).is_err());
        assert!(split_dataset(examples(2), (0.8, 0.1, 0.1), 7).is_err());
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_and_complete(n in 3usize..300, seed in any::<u64>()) {
            let s = split_dataset(examples(n), (0.8, 0.1, 0.1), seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.valid).chain(&s.test)
                .map(|e| e.indices[0]).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert!(!s.train.is_empty() && !s.valid.is_empty() && !s.test.is_empty());
        }
    }
}
