use crate::engine::{GradientStore, ParamKind, ParameterStore, Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay coefficient, applied to weights but never to biases.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001356,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

/// First and second moment estimates per parameter plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first: Vec<Tensor<T>>,
    pub second: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ParameterStore<T>) -> Self {
        let zeros: Vec<Tensor<T>> = params
            .iter()
            .map(|(_, p)| Tensor::zeros(p.value.shape()))
            .collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }
}

/// One update: `θ ← θ·(1 − lr·wd)` for weights, then the bias-corrected Adam step.
pub fn adam_step<T: Real>(
    params: &mut ParameterStore<T>,
    grads: &GradientStore<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.first.len() != params.len() {
        return Err(Error::Model(
            "optimizer state does not match parameters".into(),
        ));
    }
    for (i, (name, g)) in grads.iter().enumerate() {
        if g.shape() != params.by_index(i).shape() {
            return Err(Error::shape(
                "adam_step",
                params.by_index(i).shape(),
                g.shape(),
            ));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("gradient of {name}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let lit = T::from_f64_lossy;
    let (b1, b2) = (lit(cfg.beta1), lit(cfg.beta2));
    let corr1 = lit(1.0 - cfg.beta1.powi(t));
    let corr2 = lit(1.0 - cfg.beta2.powi(t));
    let lr = lit(cfg.learning_rate);
    let eps = lit(cfg.eps);
    let decay = lit(1.0 - cfg.learning_rate * cfg.weight_decay);

    for i in 0..params.len() {
        let decayed = params.kind(i) == ParamKind::Weight && cfg.weight_decay != 0.0;
        let g = grads.by_index(i).data();
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        let p = params.by_index_mut(i).data_mut();
        for j in 0..p.len() {
            if decayed {
                p[j] = p[j] * decay;
            }
            m[j] = b1 * m[j] + (T::one() - b1) * g[j];
            v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
            let m_hat = m[j] / corr1;
            let v_hat = v[j] / corr2;
            p[j] = p[j] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64, kind: ParamKind) -> ParameterStore<f64> {
        let mut s = ParameterStore::new();
        s.register("theta", Tensor::scalar(v), kind).unwrap();
        s
    }

    fn grads_of(store: &ParameterStore<f64>, g: f64) -> GradientStore<f64> {
        let mut gs = GradientStore::zeros_like(store);
        gs.by_index_mut(0).data_mut()[0] = g;
        gs
    }

    #[test]
    fn zero_gradient_no_decay_is_noop() {
        let mut p = scalar_store(0.7, ParamKind::Weight);
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let g = grads_of(&p, 0.0);
        adam_step(&mut p, &g, &mut st, &cfg).unwrap();
        assert_eq!(p.by_index(0).data()[0], 0.7);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar_store(0.0, ParamKind::Weight);
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let g = grads_of(&p, 1.0);
        adam_step(&mut p, &g, &mut st, &cfg).unwrap();
        let moved = -p.by_index(0).data()[0];
        assert!((moved - cfg.learning_rate).abs() < 1e-9, "{moved}");
    }

    #[test]
    fn decay_skips_biases() {
        let cfg = AdamConfig {
            weight_decay: 0.5,
            learning_rate: 0.1,
            ..Default::default()
        };
        let mut w = scalar_store(1.0, ParamKind::Weight);
        let mut b = scalar_store(1.0, ParamKind::Bias);
        let (mut sw, mut sb) = (AdamState::new(&w), AdamState::new(&b));
        let gw = grads_of(&w, 0.0);
        adam_step(&mut w, &gw, &mut sw, &cfg).unwrap();
        let gb = grads_of(&b, 0.0);
        adam_step(&mut b, &gb, &mut sb, &cfg).unwrap();
        assert!((w.by_index(0).data()[0] - 0.95).abs() < 1e-12);
        assert_eq!(b.by_index(0).data()[0], 1.0);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut p = scalar_store(1.0, ParamKind::Weight);
        let mut st = AdamState::new(&p);
        let g = grads_of(&p, f64::NAN);
        let err = adam_step(&mut p, &g, &mut st, &AdamConfig::default()).unwrap_err();
        assert!(err.to_string().contains("theta"), "{err}");
    }

    /// Oracle: simulate f(θ) = θ² from θ = 1 with an independent scalar loop
    /// and check the library update reproduces it step for step, and that |θ|
    /// falls monotonically once the moments have warmed up.
    #[test]
    fn quadratic_descent_matches_scalar_simulation() {
        let cfg = AdamConfig {
            learning_rate: 0.005,
            weight_decay: 0.0,
            ..Default::default()
        };
        let (mut th, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut oracle = Vec::new();
        for t in 1..=100 {
            let g = 2.0 * th;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            th -= 0.005 * (m / (1.0 - 0.9f64.powi(t)))
                / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
            oracle.push(th);
        }
        let mut p = scalar_store(1.0, ParamKind::Weight);
        let mut st = AdamState::new(&p);
        let mut trace = Vec::new();
        for _ in 0..100 {
            let g = 2.0 * p.by_index(0).data()[0];
            let gs = grads_of(&p, g);
            adam_step(&mut p, &gs, &mut st, &cfg).unwrap();
            trace.push(p.by_index(0).data()[0]);
        }
        for (a, b) in trace.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        for w in trace[10..].windows(2) {
            assert!(w[1].abs() < w[0].abs());
        }
    }
}
