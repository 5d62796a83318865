//! Planted-interaction data: the label depends on one field pair only.
//!
//! Every field takes values uniformly from `0..vocab`. An example is
//! "planted" when `(x0 + x1)` is even, which is a set of half the `(x0, x1)`
//! value pairs. The click probability is `σ(strength · planted − offset)`,
//! so neither field alone carries any signal and a first-order model stays
//! near AUC 0.5.

use rand::Rng;

use crate::engine::init::rng_for;
use crate::error::{Error, Result};
use crate::ingest::{prepare, PrepareOptions, PreparedData, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub num_fields: usize,
    pub vocab_per_field: usize,
    pub num_examples: usize,
    pub strength: f64,
    pub offset: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            num_fields: 6,
            vocab_per_field: 10,
            num_examples: 20_000,
            strength: 5.0,
            offset: 2.5,
            seed: 2023,
        }
    }
}

/// Field pair that carries the signal.
pub const PLANTED_PAIR: (usize, usize) = (0, 1);

pub fn is_planted(x0: usize, x1: usize) -> bool {
    (x0 + x1).is_multiple_of(2)
}

pub fn click_probability(cfg: &PlantedConfig, x0: usize, x1: usize) -> f64 {
    let z = cfg.strength * f64::from(u8::from(is_planted(x0, x1))) - cfg.offset;
    1.0 / (1.0 + (-z).exp())
}

impl PlantedConfig {
    fn validate(&self) -> Result<()> {
        if self.num_fields < 2 || self.vocab_per_field == 0 || self.num_examples == 0 {
            return Err(Error::Config(
                "planted data needs at least 2 fields, 1 value per field and 1 example".into(),
            ));
        }
        Ok(())
    }

    pub fn field_names(&self) -> Vec<String> {
        (0..self.num_fields).map(|i| format!("f{i}")).collect()
    }

    /// Raw values per example plus its sampled label.
    pub fn sample(&self) -> Result<Vec<(Vec<usize>, u8)>> {
        self.validate()?;
        let mut rng = rng_for(self.seed, "synthetic/planted");
        Ok((0..self.num_examples)
            .map(|_| {
                let x: Vec<usize> = (0..self.num_fields)
                    .map(|_| rng.gen_range(0..self.vocab_per_field))
                    .collect();
                let p = click_probability(self, x[0], x[1]);
                let label = u8::from(rng.gen::<f64>() < p);
                (x, label)
            })
            .collect())
    }

    /// The sample as a raw table with columns `f0..` and `click`, values
    /// spelled `v{n}`.
    pub fn table(&self) -> Result<Table> {
        let mut header = self.field_names();
        header.push("click".into());
        let rows = self
            .sample()?
            .into_iter()
            .map(|(x, label)| {
                let mut row: Vec<String> = x.iter().map(|v| format!("v{v}")).collect();
                row.push(label.to_string());
                row
            })
            .collect();
        Ok(Table { header, rows })
    }

    /// The table run through the regular ingest pipeline: vocabulary,
    /// labels thresholded at 0.5, and an 80/10/10 split.
    pub fn prepared(&self) -> Result<PreparedData> {
        let names = self.field_names();
        let fields: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut opts = PrepareOptions::new("click", &fields, 0.5);
        opts.seed = self.seed;
        prepare(&self.table()?, &opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_set_is_half_of_value_pairs() {
        let n = (0..10)
            .flat_map(|a| (0..10).map(move |b| (a, b)))
            .filter(|&(a, b)| is_planted(a, b))
            .count();
        assert_eq!(n, 50);
    }

    #[test]
    fn click_rate_tracks_planted_indicator() {
        let cfg = PlantedConfig::default();
        let rows = cfg.sample().unwrap();
        let (mut hit, mut n_hit, mut miss, mut n_miss) = (0, 0, 0, 0);
        for (x, y) in &rows {
            if is_planted(x[0], x[1]) {
                n_hit += 1;
                hit += *y as usize;
            } else {
                n_miss += 1;
                miss += *y as usize;
            }
        }
        let p_hit = hit as f64 / n_hit as f64;
        let p_miss = miss as f64 / n_miss as f64;
        // σ(2.5) ≈ 0.924, σ(−2.5) ≈ 0.076
        assert!((p_hit - 0.924).abs() < 0.02, "{p_hit}");
        assert!((p_miss - 0.076).abs() < 0.02, "{p_miss}");
    }

    #[test]
    fn deterministic_and_table_agrees() {
        let cfg = PlantedConfig {
            num_examples: 50,
            ..Default::default()
        };
        assert_eq!(cfg.sample().unwrap(), cfg.sample().unwrap());
        let t = cfg.table().unwrap();
        let raw = cfg.sample().unwrap();
        assert_eq!(t.header.last().unwrap(), "click");
        assert_eq!(t.rows[3][6], raw[3].1.to_string());
        assert_eq!(t.rows[3][0], format!("v{}", raw[3].0[0]));
        let p = cfg.prepared().unwrap();
        assert_eq!(p.vocab.num_fields(), 6);
        let n = p.split.train.len() + p.split.valid.len() + p.split.test.len();
        assert_eq!(n, 50);
    }
}
