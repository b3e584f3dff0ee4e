//! AdamW with decoupled weight decay.

use crate::nn::{Grads, ParamSet, Scalar, Tensor};

use super::{TrainConfig, TrainError};

/// Optimizer state: bias-corrected first and second moments per parameter,
/// in registration order.
#[derive(Debug, Clone)]
pub struct AdamWState<S> {
    step: u64,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
}

impl<S: Scalar> AdamWState<S> {
    pub fn new(params: &ParamSet<S>) -> Self {
        let m = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape().to_vec())).collect();
        let v = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape().to_vec())).collect();
        AdamWState { step: 0, m, v }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One AdamW update. Weight decay is applied directly to the weights, not
/// through the gradient; missing gradient slots are treated as zero
/// gradients. Only trainable parameters move.
pub fn adamw_step<S: Scalar>(
    params: &mut ParamSet<S>,
    grads: &Grads<S>,
    state: &mut AdamWState<S>,
    cfg: &TrainConfig,
) -> Result<(), TrainError> {
    state.step += 1;
    let t = state.step;
    let lr = S::from_f64(cfg.learning_rate);
    let beta1 = S::from_f64(cfg.beta1);
    let beta2 = S::from_f64(cfg.beta2);
    let eps = S::from_f64(cfg.eps);
    let one = S::one();
    let bias1 = S::from_f64(1.0 - cfg.beta1.powi(t as i32));
    let bias2 = S::from_f64(1.0 - cfg.beta2.powi(t as i32));
    let decay_scale = S::from_f64(1.0 - cfg.learning_rate * cfg.weight_decay);

    let ids: Vec<(crate::nn::ParamId, bool)> =
        params.iter().map(|(id, p)| (id, p.trainable)).collect();
    for (id, trainable) in ids {
        if !trainable {
            continue;
        }
        let grad = grads.get(id);
        if let Some(g) = grad {
            if !g.is_finite() {
                return Err(TrainError::NonFiniteGradient {
                    name: params.get(id).name.clone(),
                });
            }
        }
        let idx = id.index();
        let value = params.value_mut(id);
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        for i in 0..value.numel() {
            let g = grad.map(|g| g.data()[i]).unwrap_or_else(S::zero);
            let mi = beta1 * m.data()[i] + (one - beta1) * g;
            let vi = beta2 * v.data()[i] + (one - beta2) * g * g;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / bias1;
            let v_hat = vi / bias2;
            let w = value.data_mut();
            w[i] = w[i] * decay_scale - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Scale every gradient so the global L2 norm is at most `max_norm`.
pub fn clip_grad_norm<S: Scalar>(params: &ParamSet<S>, grads: &mut Grads<S>, max_norm: f64) {
    let mut sq_sum = 0.0f64;
    for (id, _) in params.iter() {
        if let Some(g) = grads.get(id) {
            sq_sum += g.data().iter().map(|v| v.into_f64() * v.into_f64()).sum::<f64>();
        }
    }
    let norm = sq_sum.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = S::from_f64(max_norm / norm);
        for (id, _) in params.iter() {
            if let Some(g) = grads.get_mut(id) {
                g.scale_assign(scale);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64, wd: f64) -> TrainConfig {
        TrainConfig { learning_rate: lr, weight_decay: wd, ..Default::default() }
    }

    fn scalar_setup(theta: f64) -> (ParamSet<f64>, crate::nn::ParamId) {
        let mut ps = ParamSet::new();
        let id = ps.register("theta", Tensor::vector(vec![theta]));
        (ps, id)
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let (mut ps, id) = scalar_setup(0.0);
        let mut grads = Grads::zeros_like(&ps);
        grads.accumulate(id, &Tensor::vector(vec![1.0]));
        let mut state = AdamWState::new(&ps);
        adamw_step(&mut ps, &grads, &mut state, &cfg(0.1, 0.0)).unwrap();
        let theta = ps.value(id).data()[0];
        assert!((theta + 0.1).abs() < 1e-6, "theta = {theta}");
    }

    #[test]
    fn zero_gradient_zero_decay_is_a_no_op() {
        let (mut ps, id) = scalar_setup(0.7);
        let grads = Grads::zeros_like(&ps);
        let mut state = AdamWState::new(&ps);
        adamw_step(&mut ps, &grads, &mut state, &cfg(0.1, 0.0)).unwrap();
        assert_eq!(ps.value(id).data()[0], 0.7);
    }

    #[test]
    fn decoupled_decay_shrinks_weights_multiplicatively() {
        let (mut ps, id) = scalar_setup(2.0);
        let grads = Grads::zeros_like(&ps);
        let mut state = AdamWState::new(&ps);
        adamw_step(&mut ps, &grads, &mut state, &cfg(0.1, 0.01)).unwrap();
        let expected = 2.0 * (1.0 - 0.1 * 0.01);
        assert!((ps.value(id).data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let (mut ps, id) = scalar_setup(0.0);
        let mut grads = Grads::zeros_like(&ps);
        grads.accumulate(id, &Tensor::vector(vec![f64::NAN]));
        let mut state = AdamWState::new(&ps);
        let err = adamw_step(&mut ps, &grads, &mut state, &cfg(0.1, 0.0)).unwrap_err();
        match err {
            TrainError::NonFiniteGradient { name } => assert_eq!(name, "theta"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn untrainable_params_never_move() {
        let mut ps = ParamSet::<f64>::new();
        let id = ps.register_with("frozen", Tensor::vector(vec![1.0]), false);
        let mut grads = Grads::zeros_like(&ps);
        grads.accumulate(id, &Tensor::vector(vec![5.0]));
        let mut state = AdamWState::new(&ps);
        adamw_step(&mut ps, &grads, &mut state, &cfg(0.1, 0.5)).unwrap();
        assert_eq!(ps.value(id).data()[0], 1.0);
    }

    #[test]
    fn matches_direct_formula_reference_over_many_steps() {
        // Independent direct-formula oracle on a small random tensor.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 16;
        let init: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut ps = ParamSet::new();
        let id = ps.register("w", Tensor::vector(init.clone()));
        let mut state = AdamWState::new(&ps);
        let cfg = TrainConfig { learning_rate: 3e-3, weight_decay: 0.02, ..Default::default() };

        let mut reference = init;
        let (mut m_ref, mut v_ref) = (vec![0.0; n], vec![0.0; n]);
        for t in 1..=25u32 {
            let gs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut grads = Grads::zeros_like(&ps);
            grads.accumulate(id, &Tensor::vector(gs.clone()));
            adamw_step(&mut ps, &grads, &mut state, &cfg).unwrap();

            for i in 0..n {
                m_ref[i] = cfg.beta1 * m_ref[i] + (1.0 - cfg.beta1) * gs[i];
                v_ref[i] = cfg.beta2 * v_ref[i] + (1.0 - cfg.beta2) * gs[i] * gs[i];
                let m_hat = m_ref[i] / (1.0 - cfg.beta1.powi(t as i32));
                let v_hat = v_ref[i] / (1.0 - cfg.beta2.powi(t as i32));
                reference[i] = reference[i] * (1.0 - cfg.learning_rate * cfg.weight_decay)
                    - cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        for (got, want) in ps.value(id).data().iter().zip(&reference) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }
}
