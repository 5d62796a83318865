use fiinet::crosses::{branch_on_tape, build_branch_2, build_branch_3, ChannelLayout, CrossOrder};
use fiinet::engine::{ParameterStore, Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_embeddings(f: usize, k: usize, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..f * k).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Tensor::new(&[f, k], data).unwrap()
}

/// Independent nested loops: pairs first, then triples, lexicographic.
fn brute_force(e: &Tensor<f64>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (f, k) = (e.shape()[0], e.shape()[1]);
    let at = |i: usize, t: usize| e.data()[i * k + t];
    let mut pairs = Vec::new();
    let mut triples = Vec::new();
    for i in 0..f {
        for j in i + 1..f {
            pairs.push((0..k).map(|t| at(i, t) * at(j, t)).collect());
        }
    }
    for i in 0..f {
        for j in i + 1..f {
            for l in j + 1..f {
                triples.push((0..k).map(|t| at(i, t) * at(j, t) * at(l, t)).collect());
            }
        }
    }
    (pairs, triples)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn branches_match_brute_force_bitwise() {
    for f in 3..=8 {
        for (seed, k) in [(1u64, 1usize), (2, 3), (3, 8)] {
            let e = random_embeddings(f, k, seed * 100 + f as u64);
            let layout = ChannelLayout::full(f).unwrap();
            let (pairs, triples) = brute_force(&e);
            assert_eq!(layout.num_pairs(), f * (f - 1) / 2);
            assert_eq!(layout.num_triples(), f * (f - 1) * (f - 2) / 6);
            assert_eq!(pairs.len() + triples.len(), layout.num_channels());

            let u2 = build_branch_2(&e, &layout).unwrap();
            let u3 = build_branch_3(&e, &layout).unwrap();
            let c2 = layout.num_pairs();
            for (c, want) in pairs.iter().enumerate() {
                assert_eq!(bits(u2.values.row(c)), bits(want), "f={f} pair {c}");
                assert!(u3.values.row(c).iter().all(|&v| v == 0.0));
            }
            for (c, want) in triples.iter().enumerate() {
                assert_eq!(bits(u3.values.row(c2 + c)), bits(want), "f={f} triple {c}");
                assert!(u2.values.row(c2 + c).iter().all(|&v| v == 0.0));
            }
        }
    }
}

#[test]
fn batched_tape_branch_matches_single_example() {
    let (f, k, b) = (6, 4, 3);
    let layout = ChannelLayout::full(f).unwrap();
    let per_example: Vec<Tensor<f64>> = (0..b)
        .map(|i| random_embeddings(f, k, 50 + i as u64))
        .collect();
    let stacked: Vec<f64> = per_example.iter().flat_map(|e| e.data().to_vec()).collect();
    let params = ParameterStore::<f64>::new();
    let mut tape = Tape::new(&params);
    let x = tape
        .constant(Tensor::new(&[b, f, k], stacked).unwrap())
        .unwrap();
    for order in [CrossOrder::Second, CrossOrder::Third] {
        let out = branch_on_tape(&mut tape, x, &layout, order).unwrap();
        let got = tape.value(out);
        assert_eq!(got.shape(), [b, layout.num_channels(), k]);
        for (i, e) in per_example.iter().enumerate() {
            let single = match order {
                CrossOrder::Second => build_branch_2(e, &layout).unwrap(),
                CrossOrder::Third => build_branch_3(e, &layout).unwrap(),
            };
            let n = layout.num_channels() * k;
            assert_eq!(
                bits(&got.data()[i * n..(i + 1) * n]),
                bits(single.values.data())
            );
        }
    }
}

proptest! {
    /// Swapping two fields' embeddings permutes channels by the induced index
    /// permutation and changes no values.
    #[test]
    fn permutation_consistency(f in 3usize..7, k in 1usize..5, seed in 0u64..1000, a in 0usize..6, b in 0usize..6) {
        let (a, b) = (a % f, b % f);
        let e = random_embeddings(f, k, seed);
        let mut swapped = e.clone();
        for t in 0..k {
            swapped.data_mut().swap(a * k + t, b * k + t);
        }
        let layout = ChannelLayout::full(f).unwrap();
        let perm = |i: usize| if i == a { b } else if i == b { a } else { i };
        let orig2 = build_branch_2(&e, &layout).unwrap();
        let new2 = build_branch_2(&swapped, &layout).unwrap();
        for (c, p) in layout.pairs().iter().enumerate() {
            let target = layout.channel_of_pair(perm(p[0]), perm(p[1])).unwrap();
            prop_assert_eq!(bits(orig2.values.row(c)), bits(new2.values.row(target)));
        }
        let orig3 = build_branch_3(&e, &layout).unwrap();
        let new3 = build_branch_3(&swapped, &layout).unwrap();
        for (c, tr) in layout.triples().iter().enumerate() {
            let mut m = [perm(tr[0]), perm(tr[1]), perm(tr[2])];
            m.sort_unstable();
            let target = layout.num_pairs() + layout.triples().iter().position(|x| *x == m).unwrap();
            // products reorder under the swap, so compare values, not bits
            for (x, y) in orig3.values.row(layout.num_pairs() + c).iter().zip(new3.values.row(target)) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_embedding_annihilates_its_channels(f in 3usize..7, k in 1usize..5, seed in 0u64..1000, z in 0usize..6) {
        let z = z % f;
        let mut e = random_embeddings(f, k, seed);
        for t in 0..k {
            e.data_mut()[z * k + t] = 0.0;
        }
        let layout = ChannelLayout::full(f).unwrap();
        let u2 = build_branch_2(&e, &layout).unwrap();
        let u3 = build_branch_3(&e, &layout).unwrap();
        for c in 0..layout.num_channels() {
            let (order, fields) = layout.channel(c).unwrap();
            let row = match order {
                CrossOrder::Second => u2.values.row(c),
                CrossOrder::Third => u3.values.row(c),
            };
            if fields.contains(&z) {
                prop_assert!(row.iter().all(|&v| v == 0.0));
            }
        }
    }
}
