//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use super::graph::Gradients;
use super::store::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Parameters excluded from updates (for example pretrained embeddings).
    pub frozen: Vec<bool>,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let sizes: Vec<usize> = (0..store.len()).map(|i| store.tensor(i).len()).collect();
        Self {
            config,
            step: 0,
            m: sizes.iter().map(|n| vec![0.0; *n]).collect(),
            v: sizes.iter().map(|n| vec![0.0; *n]).collect(),
            frozen: vec![false; sizes.len()],
        }
    }

    pub fn freeze(&mut self, idx: usize) {
        self.frozen[idx] = true;
    }
}

/// Apply one update to every non-frozen parameter and advance the step.
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.len() != store.len() || state.m.len() != store.len() {
        return Err(Error::Dimension(format!(
            "{} parameters, {} gradients, {} optimizer slots",
            store.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for i in 0..store.len() {
        let n = store.tensor(i).len();
        if state.m[i].len() != n || grads.get(i).is_some_and(|g| g.len() != n) {
            return Err(Error::Dimension(format!("shape mismatch for parameter `{}`", store.name(i))));
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);
    let precision = store.precision;
    for i in 0..store.len() {
        if state.frozen[i] {
            continue;
        }
        let Some(g) = grads.get(i) else {
            // A missing gradient is zero: decay the moments and keep moving
            // along the remaining first moment.
            let (m, v) = (&mut state.m[i], &mut state.v[i]);
            let data = &mut store.tensor_mut(i).data;
            for k in 0..data.len() {
                m[k] *= beta1;
                v[k] *= beta2;
                let update = lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
                data[k] = precision.round(data[k] - update);
            }
            continue;
        };
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let data = &mut store.tensor_mut(i).data;
        for k in 0..data.len() {
            m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
            let update = lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
            data[k] = precision.round(data[k] - update);
        }
    }
    Ok(())
}
