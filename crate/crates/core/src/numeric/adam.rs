use serde::{Deserialize, Serialize};

use super::{GradientStore, ParameterStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected first and second moments, one moment buffer per slot.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    first: ParameterStore,
    second: ParameterStore,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParameterStore) -> Self {
        Adam {
            config,
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &ParameterStore {
        &self.first
    }

    pub fn second_moment(&self) -> &ParameterStore {
        &self.second
    }

    pub fn step(&mut self, params: &mut ParameterStore, grads: &GradientStore) -> Result<()> {
        params.check_congruent(grads)?;
        params.check_congruent(&self.first)?;
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = i32::try_from(self.step).map_err(|_| Error::arg("Adam step count overflow"))?;
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        for i in 0..params.len() {
            let g = grads[i].as_slice();
            let m = self.first[i].as_mut_slice();
            let v = self.second[i].as_mut_slice();
            let p = params[i].as_mut_slice();
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
