//! Bias-corrected Adam with an explicit L2 penalty on weight matrices.

use super::{TrainConfig, TrainError};
use crate::model::{ModelParameters, ParamGrads};
use crate::numerics::Tensor;

pub const ADAM_EPSILON: f64 = 1e-8;

/// First/second moment accumulators mirroring the parameter slots.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParameters) -> Self {
        let zeros: Vec<Tensor> = (0..params.slot_count())
            .map(|i| Tensor::zeros(params.slot(i).shape().to_vec()))
            .collect();
        OptimizerState { m: zeros.clone(), v: zeros, step: 0 }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, i: usize) -> &Tensor {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &Tensor {
        &self.v[i]
    }

    pub(crate) fn from_parts(m: Vec<Tensor>, v: Vec<Tensor>, step: u64) -> Self {
        OptimizerState { m, v, step }
    }
}

/// One Adam update. The PAD embedding row is frozen: its gradient is zeroed
/// before the moments see it, so it never moves from zero.
pub fn adam_step(
    params: &mut ModelParameters,
    grads: &ParamGrads,
    state: &mut OptimizerState,
    cfg: &TrainConfig,
) -> Result<(), TrainError> {
    assert_eq!(grads.slot_count(), params.slot_count(), "gradient/parameter slot mismatch");
    state.step += 1;
    let t = state.step;
    let bias1 = 1.0 - cfg.beta1.powi(t as i32);
    let bias2 = 1.0 - cfg.beta2.powi(t as i32);
    let d = params.hidden_size();

    for i in 0..params.slot_count() {
        let info = params.slot_info(i);
        let apply_l2 = info.kind.is_weight_matrix() && cfg.l2_coefficient != 0.0;
        let pad_rows = if i == 0 { d } else { 0 };

        // Effective gradient: raw plus the L2 term, PAD row zeroed.
        let theta = params.slot(i).data();
        let mut g: Vec<f64> = grads.slot(i).data().to_vec();
        if apply_l2 {
            for (gi, &w) in g.iter_mut().zip(theta) {
                *gi += cfg.l2_coefficient * w;
            }
        }
        g[..pad_rows].fill(0.0);
        if g.iter().any(|x| !x.is_finite()) {
            return Err(TrainError::NonFiniteGradient { slot: info.name });
        }

        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let theta = params.slot_mut(i).data_mut();
        for j in 0..g.len() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            let m_hat = m[j] / bias1;
            let v_hat = v[j] / bias2;
            theta[j] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, ParamGrads};
    use crate::seeding::{stream_rng, Stream};
    use approx::assert_abs_diff_eq;

    fn setup() -> (ModelParameters, OptimizerState, TrainConfig) {
        let cfg = ModelConfig {
            hidden_size: 8,
            num_layers: 1,
            num_heads: 2,
            max_len: 6,
            ..ModelConfig::default()
        };
        let params = ModelParameters::init(&cfg, 15, &mut stream_rng(1, Stream::Init, 0, 0));
        let state = OptimizerState::new(&params);
        (params, state, TrainConfig::default())
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let (mut params, mut state, cfg) = setup();
        let before = params.clone();
        let grads = ParamGrads::zeros_like(&params);
        adam_step(&mut params, &grads, &mut state, &cfg).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let (mut params, mut state, cfg) = setup();
        let before = params.clone();
        let mut grads = ParamGrads::zeros_like(&params);
        // A healthy-magnitude gradient on one projection slot.
        for (j, g) in grads.slot_mut(2).data_mut().iter_mut().enumerate() {
            *g = if j % 2 == 0 { 0.37 } else { -1.4 };
        }
        adam_step(&mut params, &grads, &mut state, &cfg).unwrap();
        for j in 0..params.slot(2).len() {
            let delta = params.slot(2).data()[j] - before.slot(2).data()[j];
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            // Bias correction makes the first update lr * sign(g) (up to epsilon).
            assert_abs_diff_eq!(delta, -cfg.learning_rate * sign, epsilon = 1e-6);
        }
    }

    #[test]
    fn l2_touches_only_weight_matrices() {
        let (mut params, mut state, mut cfg) = setup();
        cfg.l2_coefficient = 0.1;
        // Make a layer-norm gain distinctive: if L2 saw it, it would shrink.
        let gain_slot = (0..params.slot_count())
            .find(|&i| params.slot_info(i).name == "layer0.ln1_gain")
            .unwrap();
        params.set_slot(gain_slot, Tensor::full(vec![8], 5.0));
        let bias_slot = params.slot_count() - 1;
        let before = params.clone();

        let grads = ParamGrads::zeros_like(&params);
        adam_step(&mut params, &grads, &mut state, &cfg).unwrap();

        // Gains, shifts and the mask bias stay put under pure L2.
        assert_eq!(params.slot(gain_slot), before.slot(gain_slot));
        assert_eq!(params.slot(bias_slot), before.slot(bias_slot));
        // Weight matrices shrink toward zero.
        let moved = params.slot(2).data()[0] - before.slot(2).data()[0];
        let w = before.slot(2).data()[0];
        assert!(w == 0.0 || moved.abs() > 0.0, "projection should feel L2");
        assert!(params.slot(2).data()[0].abs() <= w.abs() + 1e-12 || w == 0.0);
    }

    #[test]
    fn pad_row_stays_frozen_under_l2_and_gradient() {
        let (mut params, mut state, mut cfg) = setup();
        cfg.l2_coefficient = 0.5;
        let mut grads = ParamGrads::zeros_like(&params);
        for g in grads.slot_mut(0).data_mut() {
            *g = 1.0; // gradient everywhere, including the PAD row
        }
        adam_step(&mut params, &grads, &mut state, &cfg).unwrap();
        assert!(params.item_embedding().data()[..8].iter().all(|&v| v == 0.0));
        // Non-PAD rows did move.
        assert!(params.item_embedding().data()[8..16].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn nan_gradient_aborts_naming_the_group() {
        let (mut params, mut state, cfg) = setup();
        let mut grads = ParamGrads::zeros_like(&params);
        let wq = (0..params.slot_count())
            .find(|&i| params.slot_info(i).name == "layer0.w_q")
            .unwrap();
        grads.slot_mut(wq).data_mut()[3] = f64::NAN;
        let err = adam_step(&mut params, &grads, &mut state, &cfg).unwrap_err();
        assert!(err.to_string().contains("layer0.w_q"), "{err}");
    }

    #[test]
    fn identical_inputs_identical_trajectories() {
        let (params, state, cfg) = setup();
        let mut a = (params.clone(), state.clone());
        let mut b = (params, state);
        for run in [&mut a, &mut b] {
            let mut grads = ParamGrads::zeros_like(&run.0);
            for (j, g) in grads.slot_mut(0).data_mut().iter_mut().enumerate() {
                *g = (j as f64 * 0.01).sin();
            }
            for _ in 0..5 {
                adam_step(&mut run.0, &grads, &mut run.1, &cfg).unwrap();
            }
        }
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
