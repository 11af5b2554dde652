use serde::{Deserialize, Serialize};

use super::params::{ModelParams, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<A> {
    pub m: Vec<A>,
    pub v: Vec<A>,
    pub step: u64,
}

impl<A: Real> AdamState<A> {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![A::zero(); n_params],
            v: vec![A::zero(); n_params],
            step: 0,
        }
    }

    pub fn for_params(params: &ModelParams<A>) -> Self {
        Self::new(params.data.len())
    }
}

/// Bias-corrected Adam update.
pub fn adam_step<A: Real>(
    params: &mut ModelParams<A>,
    grads: &ModelParams<A>,
    state: &mut AdamState<A>,
    hyper: &AdamHyper,
) {
    assert_eq!(params.data.len(), grads.data.len(), "gradient layout mismatch");
    assert_eq!(params.data.len(), state.m.len(), "optimizer state layout mismatch");
    state.step += 1;
    let t = state.step as i32;
    let b1 = A::of(hyper.beta1);
    let b2 = A::of(hyper.beta2);
    let c1 = A::of(1.0 - hyper.beta1);
    let c2 = A::of(1.0 - hyper.beta2);
    let step_size = A::of(hyper.learning_rate / (1.0 - hyper.beta1.powi(t)));
    let v_scale = A::of(1.0 / (1.0 - hyper.beta2.powi(t)));
    let eps = A::of(hyper.eps);
    for (((p, &g), m), v) in params
        .data
        .iter_mut()
        .zip(&grads.data)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + c1 * g;
        *v = b2 * *v + c2 * g * g;
        *p -= step_size * *m / ((*v * v_scale).sqrt() + eps);
    }
}

/// Scales `grads` so their global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<A: Real>(grads: &mut ModelParams<A>, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm && norm.is_finite() {
        let scale = A::of(max_norm / norm);
        grads.data.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocoder::NetConfig;

    fn tiny() -> NetConfig {
        NetConfig {
            n_blocks: 1,
            layers_per_block: 2,
            residual_channels: 4,
            skip_channels: 4,
            condition_dim: 3,
            kernel_size: 2,
            quant_levels: 256,
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = tiny();
        let mut p = ModelParams::<f64>::zeros(&cfg).unwrap();
        let mut g = p.zeros_like();
        for (i, v) in g.data.iter_mut().enumerate() {
            *v = if i % 2 == 0 { 3.0 } else { -2.5 };
        }
        let mut st = AdamState::for_params(&p);
        let hyper = AdamHyper::default();
        adam_step(&mut p, &g, &mut st, &hyper);
        for (v, gv) in p.data.iter().zip(&g.data) {
            assert!((v + hyper.learning_rate * gv.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let cfg = tiny();
        let mut p = crate::vocoder::init_params::<f32>(&cfg, 4).unwrap();
        let before = p.clone();
        let g = p.zeros_like();
        let mut st = AdamState::for_params(&p);
        adam_step(&mut p, &g, &mut st, &AdamHyper::default());
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn clipping_caps_norm() {
        let cfg = tiny();
        let mut g = ModelParams::<f64>::zeros(&cfg).unwrap();
        g.data.iter_mut().for_each(|v| *v = 1.0);
        let before = clip_global_norm(&mut g, 5.0);
        assert!(before > 5.0);
        assert!((g.l2_norm() - 5.0).abs() < 1e-9);
        let again = clip_global_norm(&mut g, 5.0);
        assert!((again - 5.0).abs() < 1e-9);
    }
}
