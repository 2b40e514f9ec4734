use alloc::vec::Vec;

use super::math;
use super::{Matrix, ParameterStore};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are allocated lazily on the first
/// step to match the store they are applied to.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    moments: Vec<(Matrix, Matrix)>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        let ok = config.learning_rate > 0.0
            && config.epsilon > 0.0
            && (0.0..1.0).contains(&config.beta1)
            && (0.0..1.0).contains(&config.beta2);
        if !ok {
            return Err(invalid("Adam hyperparameters out of range"));
        }
        Ok(Self {
            config,
            step: 0,
            moments: Vec::new(),
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients in `store`. Gradients are left
    /// untouched. If any gradient is non-finite nothing is updated.
    pub fn step(&mut self, store: &mut ParameterStore) -> Result<()> {
        for id in store.ids() {
            if !store.grad(id).is_finite() {
                return Err(Error::NonFiniteGradient {
                    parameter: store.name(id).into(),
                });
            }
        }
        if self.moments.len() != store.len() {
            if !self.moments.is_empty() {
                return Err(invalid("optimizer state does not match the parameter store"));
            }
            self.moments = store
                .ids()
                .map(|id| {
                    let (r, c) = store.value(id).shape();
                    (Matrix::zeros(r, c), Matrix::zeros(r, c))
                })
                .collect();
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - libm::pow(beta1, t as f64);
        let correction2 = 1.0 - libm::pow(beta2, t as f64);

        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let (m, v) = &mut self.moments[id.index()];
            let grad = store.grad(id).data().to_vec();
            let value = store.value_mut(id).data_mut();
            for (k, g) in grad.into_iter().enumerate() {
                let mk = &mut m.data_mut()[k];
                *mk = beta1 * *mk + (1.0 - beta1) * g;
                let vk = &mut v.data_mut()[k];
                *vk = beta2 * *vk + (1.0 - beta2) * g * g;
                let m_hat = *mk / correction1;
                let v_hat = *vk / correction2;
                value[k] -= learning_rate * m_hat / (math::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(store: &mut ParameterStore, max_norm: f64) -> f64 {
    let norm = store.grad_norm();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            store.grad_mut(id).scale(s);
        }
    }
    norm
}
