use serde::{Deserialize, Serialize};

/// First-order optimizers over a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adamax,
    Adam,
}

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Per-parameter moment estimates shared by Adamax and Adam.
///
/// For Adamax `second` is the exponentially weighted infinity norm `u`;
/// for Adam it is the second raw moment `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(n: usize) -> Self {
        OptimizerState {
            first: vec![0.0; n],
            second: vec![0.0; n],
            step: 0,
        }
    }
}

/// m <- b1 m + (1 - b1) g;  u <- max(b2 u, |g|);  theta <- theta - lr / (1 - b1^t) * m / (u + eps)
pub fn adamax_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState, lr: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.first.len());
    state.step += 1;
    let step_size = lr / (1.0 - BETA1.powi(state.step as i32));
    for i in 0..params.len() {
        let g = grads[i];
        state.first[i] = BETA1 * state.first[i] + (1.0 - BETA1) * g;
        state.second[i] = (BETA2 * state.second[i]).max(g.abs());
        params[i] -= step_size * state.first[i] / (state.second[i] + EPSILON);
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState, lr: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.first.len());
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.first[i] = BETA1 * state.first[i] + (1.0 - BETA1) * g;
        state.second[i] = BETA2 * state.second[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.first[i] / c1;
        let v_hat = state.second[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}

impl OptimizerKind {
    pub fn step(self, params: &mut [f64], grads: &[f64], state: &mut OptimizerState, lr: f64) {
        match self {
            OptimizerKind::Adamax => adamax_step(params, grads, state, lr),
            OptimizerKind::Adam => adam_step(params, grads, state, lr),
        }
    }
}
