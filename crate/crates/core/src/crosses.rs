//! Explicit second- and third-order feature crosses.
//!
//! Fields arrive in a fixed order, so every cross channel is a fixed set of
//! row indices into the per-example embedding matrix. Pair channels come
//! first (lexicographic `i < j`), triple channels after them (lexicographic
//! `i < j < k`). Both branch tensors live on this shared channel axis: the
//! second-order branch is zero on triple channels and the third-order branch
//! is zero on pair channels.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::engine::{ProductGroup, Real, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrossOrder {
    Second,
    Third,
}

impl CrossOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            CrossOrder::Second => 2,
            CrossOrder::Third => 3,
        }
    }
}

pub fn enumerate_pairs(f: usize) -> Result<Vec<[usize; 2]>> {
    if f < 2 {
        return Err(Error::Model("need at least 2 fields".into()));
    }
    Ok((0..f)
        .flat_map(|i| (i + 1..f).map(move |j| [i, j]))
        .collect())
}

pub fn enumerate_triples(f: usize) -> Result<Vec<[usize; 3]>> {
    if f < 3 {
        return Err(Error::Model(
            "need at least 3 fields for third-order crosses".into(),
        ));
    }
    Ok((0..f)
        .flat_map(|i| (i + 1..f).flat_map(move |j| (j + 1..f).map(move |k| [i, j, k])))
        .collect())
}

/// The ordered channel axis shared by both branches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelLayout {
    fields: usize,
    pairs: Vec<[usize; 2]>,
    triples: Vec<[usize; 3]>,
}

impl ChannelLayout {
    /// Layout with the requested orders; an excluded order contributes no
    /// channels.
    pub fn new(fields: usize, second: bool, third: bool) -> Result<Self> {
        if !second && !third {
            return Err(Error::Model("layout needs at least one cross order".into()));
        }
        Ok(Self {
            fields,
            pairs: if second {
                enumerate_pairs(fields)?
            } else {
                Vec::new()
            },
            triples: if third {
                enumerate_triples(fields)?
            } else {
                Vec::new()
            },
        })
    }

    pub fn full(fields: usize) -> Result<Self> {
        Self::new(fields, true, true)
    }

    pub fn fields(&self) -> usize {
        self.fields
    }

    pub fn pairs(&self) -> &[[usize; 2]] {
        &self.pairs
    }

    pub fn triples(&self) -> &[[usize; 3]] {
        &self.triples
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn num_channels(&self) -> usize {
        self.pairs.len() + self.triples.len()
    }

    /// Order and participating fields of channel `c`.
    pub fn channel(&self, c: usize) -> Option<(CrossOrder, Vec<usize>)> {
        if c < self.pairs.len() {
            Some((CrossOrder::Second, self.pairs[c].to_vec()))
        } else {
            self.triples
                .get(c - self.pairs.len())
                .map(|t| (CrossOrder::Third, t.to_vec()))
        }
    }

    pub fn channel_of_pair(&self, i: usize, j: usize) -> Option<usize> {
        self.pairs.iter().position(|p| *p == [i.min(j), i.max(j)])
    }

    /// Product groups for one branch, positioned on the shared axis.
    pub fn groups(&self, order: CrossOrder) -> Vec<ProductGroup> {
        match order {
            CrossOrder::Second => self
                .pairs
                .iter()
                .enumerate()
                .map(|(c, p)| ProductGroup {
                    channel: c,
                    rows: p.to_vec(),
                })
                .collect(),
            CrossOrder::Third => self
                .triples
                .iter()
                .enumerate()
                .map(|(c, t)| ProductGroup {
                    channel: self.pairs.len() + c,
                    rows: t.to_vec(),
                })
                .collect(),
        }
    }

    /// Text dump: `channel_index TAB order TAB field|field[|field]`.
    pub fn to_tsv(&self, field_names: &[String]) -> Result<String> {
        if field_names.len() != self.fields {
            return Err(Error::Model(format!(
                "layout has {} fields, got {} names",
                self.fields,
                field_names.len()
            )));
        }
        let mut out = String::from("channel_index\torder\tfield_tuple\n");
        for c in 0..self.num_channels() {
            let (order, fs) = self.channel(c).expect("channel in range");
            let _ = writeln!(
                out,
                "{c}\t{}\t{}",
                order.as_u8(),
                field_tuple(&fs, field_names)
            );
        }
        Ok(out)
    }
}

pub(crate) fn field_tuple(fields: &[usize], names: &[String]) -> String {
    fields
        .iter()
        .map(|&i| names[i].as_str())
        .collect::<Vec<_>>()
        .join("|")
}

/// One branch's cross map for a single example: `C × k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTensor<T> {
    pub values: Tensor<T>,
    pub order: CrossOrder,
}

fn build_branch<T: Real>(
    embeddings: &Tensor<T>,
    layout: &ChannelLayout,
    order: CrossOrder,
) -> Result<BranchTensor<T>> {
    let [f, k] = *embeddings.shape() else {
        return Err(Error::shape(
            "build_branch",
            embeddings.shape(),
            &[layout.fields(), 0],
        ));
    };
    if f != layout.fields() {
        return Err(Error::shape(
            "build_branch",
            embeddings.shape(),
            &[layout.fields(), k],
        ));
    }
    if order == CrossOrder::Third && layout.num_triples() == 0 {
        return Err(Error::Model("layout has no third-order channels".into()));
    }
    if order == CrossOrder::Second && layout.num_pairs() == 0 {
        return Err(Error::Model("layout has no second-order channels".into()));
    }
    let mut values = Tensor::zeros(&[layout.num_channels(), k]);
    for g in layout.groups(order) {
        let out = &mut values.data_mut()[g.channel * k..(g.channel + 1) * k];
        out.copy_from_slice(embeddings.row(g.rows[0]));
        for &r in &g.rows[1..] {
            for (o, &e) in out.iter_mut().zip(embeddings.row(r)) {
                *o = *o * e;
            }
        }
    }
    Ok(BranchTensor { values, order })
}

/// Second-order branch `Ũ`: channel `(i,j)` holds `e_i ⊙ e_j`.
pub fn build_branch_2<T: Real>(
    embeddings: &Tensor<T>,
    layout: &ChannelLayout,
) -> Result<BranchTensor<T>> {
    build_branch(embeddings, layout, CrossOrder::Second)
}

/// Third-order branch `Û`: channel `(i,j,k)` holds `e_i ⊙ e_j ⊙ e_k`.
pub fn build_branch_3<T: Real>(
    embeddings: &Tensor<T>,
    layout: &ChannelLayout,
) -> Result<BranchTensor<T>> {
    build_branch(embeddings, layout, CrossOrder::Third)
}

/// Batched branch on a tape: `embedded [B, f, k] -> [B, C, k]`.
pub fn branch_on_tape<T: Real>(
    tape: &mut Tape<'_, T>,
    embedded: Var,
    layout: &ChannelLayout,
    order: CrossOrder,
) -> Result<Var> {
    tape.product_gather(
        embedded,
        Arc::new(layout.groups(order)),
        layout.num_channels(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, v).unwrap()
    }

    #[test]
    fn pair_enumeration() {
        assert_eq!(
            enumerate_pairs(4).unwrap(),
            vec![[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]
        );
        assert_eq!(enumerate_pairs(2).unwrap(), vec![[0, 1]]);
        assert_eq!(enumerate_pairs(10).unwrap().len(), 45);
        assert_eq!(
            enumerate_pairs(1).unwrap_err().to_string(),
            "invalid model: need at least 2 fields"
        );
    }

    #[test]
    fn triple_enumeration() {
        assert_eq!(
            enumerate_triples(4).unwrap(),
            vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]
        );
        assert_eq!(enumerate_triples(3).unwrap(), vec![[0, 1, 2]]);
        assert_eq!(enumerate_triples(6).unwrap().len(), 20);
        assert!(enumerate_triples(2).is_err());
    }

    #[test]
    fn two_field_branch() {
        let layout = ChannelLayout::new(2, true, false).unwrap();
        let u = build_branch_2(&t(&[2, 2], &[1., 2., 3., 4.]), &layout).unwrap();
        assert_eq!(u.values.data(), &[3., 8.]);
    }

    #[test]
    fn three_field_triple() {
        let layout = ChannelLayout::full(3).unwrap();
        let e = t(&[3, 2], &[1., 1., 2., 2., 3., 3.]);
        let u3 = build_branch_3(&e, &layout).unwrap();
        // three pair slots (zero), then the single triple
        assert_eq!(u3.values.data(), &[0., 0., 0., 0., 0., 0., 6., 6.]);
        let u2 = build_branch_2(&e, &layout).unwrap();
        assert_eq!(u2.values.row(3), &[0., 0.]);
    }

    #[test]
    fn zero_embedding_annihilates() {
        let layout = ChannelLayout::full(4).unwrap();
        let e = t(&[4, 2], &[1., 2., 0., 0., 3., -1., 0.5, 2.]);
        let u2 = build_branch_2(&e, &layout).unwrap();
        let u3 = build_branch_3(&e, &layout).unwrap();
        for c in 0..layout.num_channels() {
            let (_, fs) = layout.channel(c).unwrap();
            if fs.contains(&1) {
                assert!(u2.values.row(c).iter().all(|&v| v == 0.0));
                assert!(u3.values.row(c).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn identical_embeddings_give_cubes() {
        let layout = ChannelLayout::full(5).unwrap();
        let e = t(&[5, 2], &[1.5, -2.0].repeat(5));
        let u3 = build_branch_3(&e, &layout).unwrap();
        for c in layout.num_pairs()..layout.num_channels() {
            assert_eq!(u3.values.row(c), &[1.5f64.powi(3), -8.0]);
        }
    }

    #[test]
    fn layout_dump() {
        let layout = ChannelLayout::full(3).unwrap();
        let names: Vec<String> = ["u", "i", "c"].iter().map(|s| s.to_string()).collect();
        let dump = layout.to_tsv(&names).unwrap();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0\t2\tu|i");
        assert_eq!(lines[4], "3\t3\tu|i|c");
    }
}
