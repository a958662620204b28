use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Bias-corrected Adam over an ordered list of parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, block_sizes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            m: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Descends along `grads`. Every gradient is validated before any
    /// parameter is touched, so a rejected step leaves `params` and the
    /// moment accumulators unchanged.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], names: &[String]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape("adam parameter blocks", self.m.len(), params.len().max(grads.len())));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            let name = names.get(k).map(String::as_str).unwrap_or("?");
            if p.len() != self.m[k].len() {
                return Err(Error::shape(format!("adam block {name}"), self.m[k].len(), p.len()));
            }
            if g.len() != p.len() {
                return Err(Error::shape(format!("gradient block {name}"), p.len(), g.len()));
            }
            if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient {bad} in {name}")));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (k, p) in params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], grads[k]);
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
