use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { eta: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v2: Vec<f64>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self { t: 0, m: vec![0.0; n_params], v2: vec![0.0; n_params], config }
    }
}

/// One bias-corrected Adam update of `weights` in place.
pub fn adam_step(state: &mut AdamState, weights: &mut [f64], grads: &[f64]) {
    assert_eq!(weights.len(), grads.len());
    assert_eq!(weights.len(), state.m.len());
    let AdamConfig { eta, beta1, beta2, eps } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for ((w, &g), (m, v)) in weights.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v2.iter_mut())) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *w -= eta * m_hat / (v_hat.sqrt() + eps);
    }
}
