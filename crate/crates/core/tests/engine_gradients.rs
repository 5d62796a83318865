//! Every tape primitive against central finite differences on small random
//! instances, at 64-bit precision.

use std::sync::Arc;

use fiinet::engine::{
    finite_difference_check, GradCheckOptions, GradientStore, ParamKind, ParameterStore,
    ProductGroup, Tape, Tensor, Var,
};
use fiinet::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-6;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            // keep away from relu kinks and max ties
            let v: f64 = rng.gen_range(0.05..1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Registers `inputs` as parameters, reduces `build`'s output to a scalar
/// through a fixed random projection, and checks every input's gradient.
fn check(
    seed: u64,
    inputs: &[(&str, &[usize])],
    build: impl Fn(&mut Tape<'_, f64>, &[Var]) -> Result<Var>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParameterStore::new();
    for (name, shape) in inputs {
        params
            .register(name, random(&mut rng, shape), ParamKind::Weight)
            .unwrap();
    }
    let probe_seed: u64 = rng.gen();
    let loss = |p: &ParameterStore<f64>| -> Result<(f64, GradientStore<f64>)> {
        let mut tape = Tape::new(p);
        let vars = inputs
            .iter()
            .map(|(n, _)| tape.param(n))
            .collect::<Result<Vec<_>>>()?;
        let out = build(&mut tape, &vars)?;
        let shape = tape.value(out).shape().to_vec();
        let l = if shape.iter().product::<usize>() == 1 {
            tape.reshape(out, &[1])?
        } else {
            let r = random(&mut ChaCha8Rng::seed_from_u64(probe_seed), &shape);
            let r = tape.constant(r)?;
            tape.hadamard(out, r)?
        };
        let l = tape.sum_all(l)?;
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
    assert_eq!(report.groups.len(), inputs.len());
    assert!(report.max_rel_error() < TOL, "{report:?}");
}

#[test]
fn matmul() {
    for s in 0..5 {
        check(s, &[("x", &[3, 3]), ("w", &[3, 3])], |t, v| {
            t.matmul(v[0], v[1])
        });
        check(s, &[("x", &[2, 3]), ("w", &[3, 4])], |t, v| {
            t.matmul(v[0], v[1])
        });
    }
}

#[test]
fn elementwise_binary() {
    for s in 0..5 {
        check(s, &[("a", &[3, 3]), ("b", &[3, 3])], |t, v| {
            t.add(v[0], v[1])
        });
        check(s, &[("a", &[3, 3]), ("b", &[3, 3])], |t, v| {
            t.sub(v[0], v[1])
        });
        check(s, &[("a", &[3, 3]), ("b", &[3, 3])], |t, v| {
            t.hadamard(v[0], v[1])
        });
    }
}

#[test]
fn hadamard_of_itself() {
    check(9, &[("a", &[3, 3])], |t, v| t.hadamard(v[0], v[0]));
}

#[test]
fn row_bias() {
    for s in 0..5 {
        check(s, &[("x", &[3, 3]), ("b", &[3])], |t, v| {
            t.add_row_bias(v[0], v[1])
        });
    }
}

#[test]
fn activations() {
    for s in 0..5 {
        check(s, &[("x", &[3, 3])], |t, v| t.relu(v[0]));
        check(s, &[("x", &[3, 3])], |t, v| t.sigmoid(v[0]));
        check(s, &[("x", &[3, 3])], |t, v| t.one_minus(v[0]));
    }
}

#[test]
fn reductions() {
    for s in 0..5 {
        check(s, &[("x", &[3, 3, 3])], |t, v| t.mean_last(v[0]));
        check(s, &[("x", &[3, 3, 3])], |t, v| t.max_last(v[0]));
        check(s, &[("x", &[3, 3])], |t, v| t.row_sum(v[0]));
        check(s, &[("x", &[3, 3])], |t, v| t.sum_all(v[0]));
        check(s, &[("x", &[3, 3])], |t, v| t.reshape(v[0], &[9, 1]));
    }
}

#[test]
fn pair_softmax_and_channel_scaling() {
    for s in 0..5 {
        check(s, &[("la", &[3, 3]), ("lb", &[3, 3])], |t, v| {
            t.pair_softmax(v[0], v[1])
        });
        check(s, &[("u", &[3, 3, 2]), ("w", &[3, 3])], |t, v| {
            t.scale_channels(v[0], v[1])
        });
    }
}

#[test]
fn lookup_and_product_gather() {
    for s in 0..5 {
        let idx = Arc::new(vec![0, 2, 1, 2, 1, 0, 2, 2, 2]);
        check(
            s,
            &[("t0", &[3, 3]), ("t1", &[3, 3]), ("t2", &[3, 3])],
            |t, v| t.lookup(v, idx.clone()),
        );
        let groups = Arc::new(vec![
            ProductGroup {
                channel: 0,
                rows: vec![0, 1],
            },
            ProductGroup {
                channel: 2,
                rows: vec![0, 1, 2],
            },
            ProductGroup {
                channel: 3,
                rows: vec![1, 1],
            },
        ]);
        check(s, &[("x", &[3, 3, 3])], |t, v| {
            t.product_gather(v[0], groups.clone(), 4)
        });
    }
}

#[test]
fn bce_through_sigmoid() {
    for s in 0..5 {
        let labels = [1.0, 0.0, 1.0];
        check(s, &[("z", &[3, 1])], |t, v| {
            let p = t.sigmoid(v[0])?;
            t.bce(p, &labels)
        });
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    let mut params = ParameterStore::new();
    params
        .register("a", Tensor::<f64>::zeros(&[3, 3]), ParamKind::Weight)
        .unwrap();
    params
        .register("b", Tensor::<f64>::zeros(&[3, 2]), ParamKind::Weight)
        .unwrap();
    let mut tape = Tape::new(&params);
    let a = tape.param("a").unwrap();
    let b = tape.param("b").unwrap();
    let e = tape.add(a, b).unwrap_err();
    assert_eq!(e.category(), "model");
    assert!(
        e.to_string().contains("[3, 3]") && e.to_string().contains("[3, 2]"),
        "{e}"
    );
    assert!(tape.matmul(b, a).is_err());
}

#[test]
fn backward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut params = ParameterStore::new();
    params
        .register("w", random(&mut rng, &[3, 3]), ParamKind::Weight)
        .unwrap();
    let run = || {
        let mut tape = Tape::new(&params);
        let w = tape.param("w").unwrap();
        let s = tape.sigmoid(w).unwrap();
        let m = tape.matmul(s, w).unwrap();
        let l = tape.sum_all(m).unwrap();
        tape.backward(l).unwrap().get("w").unwrap().data().to_vec()
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}
