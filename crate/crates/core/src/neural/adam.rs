use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Decay weights directly (AdamW) instead of adding `λθ` to the gradient.
    pub decoupled_decay: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            decoupled_decay: true,
        }
    }
}

/// First/second moments per parameter plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Tensor<S>>,
    second: Vec<Tensor<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(params: &ParamStore<S>, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor<S>> = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        AdamState {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn first_moment(&self, i: usize) -> &Tensor<S> {
        &self.first[i]
    }

    pub fn second_moment(&self, i: usize) -> &Tensor<S> {
        &self.second[i]
    }
}

/// One bias-corrected Adam update. Parameters without a gradient buffer are
/// treated as having zero gradient.
pub fn adam_step<S: Scalar>(params: &mut ParamStore<S>, grads: &Gradients<S>, state: &mut AdamState<S>) -> Result<()> {
    if state.first.len() != params.len()
        || state
            .first
            .iter()
            .zip(params.iter())
            .any(|(m, (_, p))| m.shape() != p.value.shape())
    {
        return Err(Error::OptimizerState(format!(
            "state tracks {} tensors, store has {}",
            state.first.len(),
            params.len()
        )));
    }
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let (b1, b2) = (S::from_f64_lossy(c.beta1), S::from_f64_lossy(c.beta2));
    let lr = S::from_f64_lossy(c.lr);
    let eps = S::from_f64_lossy(c.eps);
    let wd = S::from_f64_lossy(c.weight_decay);
    let bc1 = S::one() - b1.powi(t);
    let bc2 = S::one() - b2.powi(t);
    let ids: Vec<_> = params.iter().map(|(id, p)| (id, p.trainable)).collect();
    for (id, trainable) in ids {
        if !trainable {
            continue;
        }
        let i = id.index();
        let grad = grads.get(id);
        let theta = params.get_mut(id).value.data_mut();
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        for j in 0..theta.len() {
            let mut g = grad.map_or(S::zero(), |g| g[j]);
            if !c.decoupled_decay {
                g += wd * theta[j];
            }
            m[j] = b1 * m[j] + (S::one() - b1) * g;
            v[j] = b2 * v[j] + (S::one() - b2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            let mut update = lr * m_hat / (v_hat.sqrt() + eps);
            if c.decoupled_decay {
                update += lr * wd * theta[j];
            }
            theta[j] -= update;
        }
    }
    Ok(())
}
