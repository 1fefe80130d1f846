//! AdamW with bias-corrected moments and decoupled weight decay.

use serde::{Deserialize, Serialize};

use super::mlp::{zeros_like, Layers};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub m: Layers,
    pub v: Layers,
    pub t: u64,
}

impl AdamWState {
    pub fn new(like: &Layers) -> AdamWState {
        AdamWState {
            m: zeros_like(like),
            v: zeros_like(like),
            t: 0,
        }
    }
}

/// One scalar update at step `t` (already incremented).
#[inline]
pub fn adamw_update(theta: &mut f64, g: f64, m: &mut f64, v: &mut f64, t: u64, cfg: &AdamWConfig) {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / (1.0 - cfg.beta1.powi(t as i32));
    let v_hat = *v / (1.0 - cfg.beta2.powi(t as i32));
    *theta -= cfg.learning_rate * (m_hat / (v_hat.sqrt() + cfg.epsilon) + cfg.weight_decay * *theta);
}

pub fn adamw_step(params: &mut Layers, grads: &Layers, state: &mut AdamWState, cfg: &AdamWConfig) {
    state.t += 1;
    let t = state.t;
    for k in 0..params.len() {
        let (p, g) = (&mut params[k], &grads[k]);
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for (((theta, grad), mm), vv) in p.values_mut().zip(g.values()).zip(m.values_mut()).zip(v.values_mut()) {
            adamw_update(theta, *grad, mm, vv, t, cfg);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mlp::Dense;

    fn scalar_layers(theta: f64) -> Layers {
        let one = |v: f64| Dense {
            rows: 1,
            cols: 1,
            weights: vec![v],
            bias: vec![v],
        };
        [one(theta), one(theta), one(theta), one(theta)]
    }

    fn cfg(lr: f64, wd: f64) -> AdamWConfig {
        AdamWConfig {
            learning_rate: lr,
            weight_decay: wd,
            ..AdamWConfig::default()
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = 0.5, v_hat = 0.25, so the step is 0.1 * 0.5 / (0.5 + 1e-8)
        let (mut theta, mut m, mut v) = (1.0, 0.0, 0.0);
        adamw_update(&mut theta, 0.5, &mut m, &mut v, 1, &cfg(0.1, 0.0));
        let expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
        assert!((theta - expected).abs() < 1e-15);
        assert!((theta - 0.9).abs() < 1e-7);
        assert!((m - 0.05).abs() < 1e-15);
        assert!((v - 0.00025).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = scalar_layers(1.0);
        let g = scalar_layers(0.0);
        let mut s = AdamWState::new(&p);
        adamw_step(&mut p, &g, &mut s, &cfg(0.1, 0.0));
        assert_eq!(p, scalar_layers(1.0));
        assert_eq!(s.t, 1);
    }

    #[test]
    fn decoupled_decay_alone() {
        let mut p = scalar_layers(1.0);
        let g = scalar_layers(0.0);
        let mut s = AdamWState::new(&p);
        adamw_step(&mut p, &g, &mut s, &cfg(0.1, 0.01));
        for layer in &p {
            assert!(layer.values().all(|&v| (v - 0.999).abs() < 1e-15));
        }
    }

    #[test]
    fn bias_correction_over_steps() {
        // constant gradient: m_hat = g and v_hat = g^2 at every step
        let c = cfg(0.01, 0.0);
        let (mut theta, mut m, mut v) = (0.0, 0.0, 0.0);
        for t in 1..=5 {
            let before = theta;
            adamw_update(&mut theta, 2.0, &mut m, &mut v, t, &c);
            assert!((before - theta - 0.01 * 2.0 / (2.0 + 1e-8)).abs() < 1e-12);
        }
    }
}
