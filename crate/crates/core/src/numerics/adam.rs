use serde::{Deserialize, Serialize};

use super::{Matrix, ParamSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. First and second moments live here, one pair
/// per parameter of the set it was created for.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    moments: Vec<(Matrix, Matrix)>,
    t: u64,
}

impl Adam {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let moments = params
            .iter()
            .map(|p| {
                let (r, c) = p.value.shape();
                (Matrix::zeros(r, c), Matrix::zeros(r, c))
            })
            .collect();
        Self {
            config,
            moments,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update from the `grad` fields of every trainable parameter.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        self.t += 1;
        adam_step(params, &mut self.moments, &self.config, self.t)
    }
}

/// Applies one Adam update at step `t` (1-based) in place.
pub fn adam_step(
    params: &mut ParamSet,
    moments: &mut [(Matrix, Matrix)],
    cfg: &AdamConfig,
    t: u64,
) -> Result<()> {
    if moments.len() != params.len() {
        return Err(Error::Validation("moment buffers do not match parameter set".into()));
    }
    for p in params.iter() {
        if p.trainable && !p.grad.is_finite() {
            return Err(Error::NonFiniteGradient {
                param: p.name.clone(),
            });
        }
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for (p, (m, v)) in params.iter_mut().zip(moments.iter_mut()) {
        if !p.trainable {
            continue;
        }
        let g = p.grad.data();
        let x = p.value.data_mut();
        let m = m.data_mut();
        let v = v.data_mut();
        for i in 0..g.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            x[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
