use fiinet::crosses::{build_branch_2, build_branch_3, ChannelLayout, CrossOrder};
use fiinet::engine::ops::pair_softmax;
use fiinet::engine::{
    finite_difference_check, GradCheckOptions, ParamKind, ParameterStore, Tape, Tensor,
};
use fiinet::sk_attention::{
    apply_select, fuse_sum, global_mean_pool, reduce, register_params, select_softmax, sk_on_tape,
    Pooling, SkConfig, EXCITE_A, EXCITE_B, REDUCE,
};
use fiinet::Result;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], seed: u64, scale: f64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(
        shape,
        (0..n).map(|_| rng.gen_range(-scale..scale)).collect(),
    )
    .unwrap()
}

/// SK parameters with A ≠ B so the weights leave 0.5.
fn sk_params(c: usize, seed: u64) -> ParameterStore<f64> {
    let mut p = ParameterStore::new();
    let d = register_params(&mut p, c, &SkConfig::default(), seed).unwrap();
    p.set(EXCITE_B, random(&[d, c], seed + 1, 1.0)).unwrap();
    p
}

#[test]
fn batched_layer_matches_single_example_pipeline() {
    let (f, k, b) = (5, 3, 4);
    let layout = ChannelLayout::full(f).unwrap();
    let c = layout.num_channels();
    let params = sk_params(c, 11);
    let embeddings: Vec<Tensor<f64>> = (0..b)
        .map(|i| random(&[f, k], 20 + i as u64, 1.5))
        .collect();

    let branches: Vec<_> = embeddings
        .iter()
        .map(|e| {
            (
                build_branch_2(e, &layout).unwrap(),
                build_branch_3(e, &layout).unwrap(),
            )
        })
        .collect();
    let stack = |order: CrossOrder| -> Tensor<f64> {
        let data = branches
            .iter()
            .flat_map(|(u2, u3)| match order {
                CrossOrder::Second => u2.values.data().to_vec(),
                CrossOrder::Third => u3.values.data().to_vec(),
            })
            .collect();
        Tensor::new(&[b, c, k], data).unwrap()
    };
    let mut tape = Tape::new(&params);
    let u2 = tape.constant(stack(CrossOrder::Second)).unwrap();
    let u3 = tape.constant(stack(CrossOrder::Third)).unwrap();
    let nodes = sk_on_tape(&mut tape, u2, u3, Pooling::Mean).unwrap();

    for (i, (b2, b3)) in branches.iter().enumerate() {
        let fused = fuse_sum(b2, b3).unwrap();
        let z = global_mean_pool(&fused).unwrap();
        let s = reduce(&z, params.get(REDUCE).unwrap()).unwrap();
        let (a, bw) = select_softmax(
            &s,
            params.get(EXCITE_A).unwrap(),
            params.get(EXCITE_B).unwrap(),
        )
        .unwrap();
        let v = apply_select(&b2.values, &b3.values, &a, &bw).unwrap();

        let got_a = &tape.value(nodes.weight_second).data()[i * c..(i + 1) * c];
        let got_v = &tape.value(nodes.output).data()[i * c * k..(i + 1) * c * k];
        for (x, y) in got_a.iter().zip(&a) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in got_v.iter().zip(v.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        // independent per-channel formula: V_c = a_c·Ũ_c on pairs, b_c·Û_c on triples
        for ch in 0..c {
            for t in 0..k {
                let want = if ch < layout.num_pairs() {
                    a[ch] * b2.values.row(ch)[t]
                } else {
                    bw[ch] * b3.values.row(ch)[t]
                };
                assert!((v.row(ch)[t] - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn identical_excite_matrices_give_half_weights() {
    let c = 20;
    let mut p = ParameterStore::<f64>::new();
    let d = register_params(&mut p, c, &SkConfig::default(), 3).unwrap();
    assert_eq!(d, 8);
    let s = random(&[d], 4, 2.0);
    let (a, b) = select_softmax(&s, p.get(EXCITE_A).unwrap(), p.get(EXCITE_B).unwrap()).unwrap();
    assert!(a.iter().chain(&b).all(|&w| w == 0.5));
}

#[test]
fn sk_gradients_pass_finite_differences() {
    let (bsz, c, k) = (3, 10, 4);
    let mut params = sk_params(c, 5);
    params
        .register("u2", random(&[bsz, c, k], 6, 1.0), ParamKind::Weight)
        .unwrap();
    params
        .register("u3", random(&[bsz, c, k], 7, 1.0), ParamKind::Weight)
        .unwrap();
    let probe = random(&[bsz, c, k], 8, 1.0);
    let loss = |p: &ParameterStore<f64>| -> Result<(f64, fiinet::engine::GradientStore<f64>)> {
        let mut tape = Tape::new(p);
        let u2 = tape.param("u2")?;
        let u3 = tape.param("u3")?;
        let nodes = sk_on_tape(&mut tape, u2, u3, Pooling::Mean)?;
        let r = tape.constant(probe.clone())?;
        let h = tape.hadamard(nodes.output, r)?;
        let l = tape.sum_all(h)?;
        Ok((tape.value(l).item()?, tape.backward(l)?))
    };
    let (_, grads) = loss(&params).unwrap();
    let report = finite_difference_check(
        &params,
        &grads,
        |p| Ok(loss(p)?.0),
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert_eq!(report.groups.len(), 5);
    assert!(report.max_rel_error() < 1e-4, "{report:?}");
}

proptest! {
    #[test]
    fn weights_are_normalized(la in -50.0f64..50.0, lb in -50.0f64..50.0) {
        let (a, b) = pair_softmax(la, lb);
        prop_assert!((a + b - 1.0).abs() < 1e-6);
        let (a32, b32) = pair_softmax(la as f32, lb as f32);
        prop_assert!((a32 + b32 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_is_shift_invariant(la in -20.0f64..20.0, lb in -20.0f64..20.0, shift in -100.0f64..100.0) {
        let (a, _) = pair_softmax(la, lb);
        let (a2, _) = pair_softmax(la + shift, lb + shift);
        prop_assert!((a - a2).abs() < 1e-12);
    }

    #[test]
    fn output_is_a_convex_channel_combination(seed in 0u64..500, f in 3usize..6, k in 1usize..4) {
        let layout = ChannelLayout::full(f).unwrap();
        let c = layout.num_channels();
        let params = sk_params(c, seed);
        let e = random(&[f, k], seed + 7, 2.0);
        let (u2, u3) = (build_branch_2(&e, &layout).unwrap(), build_branch_3(&e, &layout).unwrap());
        let z = global_mean_pool(&fuse_sum(&u2, &u3).unwrap()).unwrap();
        let s = reduce(&z, params.get(REDUCE).unwrap()).unwrap();
        let (a, b) = select_softmax(&s, params.get(EXCITE_A).unwrap(), params.get(EXCITE_B).unwrap()).unwrap();
        let v = apply_select(&u2.values, &u3.values, &a, &b).unwrap();
        for (ch, &w) in a.iter().enumerate() {
            prop_assert!(w > 0.0 && w < 1.0);
            let inf = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!(inf(v.row(ch)) <= inf(u2.values.row(ch)).max(inf(u3.values.row(ch))) + 1e-15);
        }
    }
}
