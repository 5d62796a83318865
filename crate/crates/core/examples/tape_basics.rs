//! The reverse-mode engine on its own: fit a two-layer network to XOR with
//! Adam, then verify its gradients against finite differences.
//!
//! `cargo run --example tape_basics`

use fiinet::engine::{
    finite_difference_check, xavier_init, GradCheckOptions, GradientStore, ParamKind,
    ParameterStore, Tape, Tensor,
};
use fiinet::training::{adam_step, AdamConfig, AdamState};
use fiinet::Result;

const X: [f64; 8] = [0., 0., 0., 1., 1., 0., 1., 1.];
const Y: [f64; 4] = [0., 1., 1., 0.];

fn loss(p: &ParameterStore<f64>) -> Result<(f64, GradientStore<f64>)> {
    let mut tape = Tape::new(p);
    let x = tape.constant(Tensor::from_f64(&[4, 2], &X)?)?;
    let (w1, b1, w2) = (tape.param("w1")?, tape.param("b1")?, tape.param("w2")?);
    let h = tape.matmul(x, w1)?;
    let h = tape.add_row_bias(h, b1)?;
    let h = tape.sigmoid(h)?;
    let z = tape.matmul(h, w2)?;
    let p = tape.sigmoid(z)?;
    let l = tape.bce(p, &Y)?;
    Ok((tape.value(l).item()?, tape.backward(l)?))
}

fn main() -> anyhow::Result<()> {
    let mut p = ParameterStore::new();
    p.register("w1", xavier_init(&[2, 8], 3, "w1")?, ParamKind::Weight)?;
    p.register("b1", Tensor::zeros(&[8]), ParamKind::Bias)?;
    p.register("w2", xavier_init(&[8, 1], 3, "w2")?, ParamKind::Weight)?;

    let adam = AdamConfig {
        learning_rate: 0.05,
        weight_decay: 0.0,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(&p);
    for step in 0..=1500 {
        let (l, g) = loss(&p)?;
        if step % 300 == 0 {
            println!("step {step:>4} loss {l:.5}");
        }
        adam_step(&mut p, &g, &mut state, &adam)?;
    }

    let (_, g) = loss(&p)?;
    let report = finite_difference_check(&p, &g, |q| Ok(loss(q)?.0), &GradCheckOptions::default())?;
    for group in &report.groups {
        println!(
            "{}: max relative error {:.2e}",
            group.name, group.max_rel_error
        );
    }
    Ok(())
}
