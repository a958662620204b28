//! Embedding-space stand-in for a generative agent: each action dimension
//! moves the embedding along a fixed orthonormal direction,
//! `e' = normalize(e + alpha * sum_i a_i d_i)`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ContentState, EditAgent};
use crate::editor::{ActionSpace, ActionVector};
use crate::embedding::Embedding;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockAgentConfig {
    pub dim: usize,
    pub action_dims: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Optional first direction; the rest are orthogonalised against it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<Embedding>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockAgent {
    directions: Vec<Embedding>,
    step_size: f64,
}

impl MockAgent {
    pub fn new(cfg: &MockAgentConfig) -> Result<Self> {
        if cfg.action_dims > cfg.dim {
            return Err(Error::InvalidInput(format!(
                "{} orthogonal directions do not fit in dimension {}",
                cfg.action_dims, cfg.dim
            )));
        }
        let mut r = rng::stream(cfg.seed, "mock-agent-directions");
        let mut basis: Vec<Embedding> = Vec::with_capacity(cfg.action_dims);
        let mut candidates = cfg.planted.iter().cloned().collect::<Vec<_>>().into_iter();
        while basis.len() < cfg.action_dims {
            let v = match candidates.next() {
                Some(p) => {
                    p.expect_dim(cfg.dim)?;
                    p
                }
                None => Embedding::new((0..cfg.dim).map(|_| StandardNormal.sample(&mut r)).collect())?,
            };
            let mut v = v.into_values();
            for b in &basis {
                let proj: f64 = v.iter().zip(b.values()).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b.values()).for_each(|(x, y)| *x -= proj * y);
            }
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                basis.push(Embedding::new(v.into_iter().map(|x| x / n).collect())?);
            }
        }
        Self::from_directions(basis, cfg.step_size)
    }

    pub fn from_directions(directions: Vec<Embedding>, step_size: f64) -> Result<Self> {
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidInput(format!("step size must be positive, got {step_size}")));
        }
        for (i, a) in directions.iter().enumerate() {
            for (j, b) in directions.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (a.dot(b) - target).abs() > 1e-9 {
                    return Err(Error::InvalidInput("mock directions must be orthonormal".into()));
                }
            }
        }
        Ok(Self { directions, step_size })
    }

    pub fn directions(&self) -> &[Embedding] {
        &self.directions
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// The zero action is the identity.
    pub fn mock_edit(&self, e: &Embedding, action: &ActionVector) -> Result<Embedding> {
        if action.len() != self.directions.len() {
            return Err(Error::shape("mock action", self.directions.len(), action.len()));
        }
        if action.values().iter().all(|&a| a == 0.0) {
            return Ok(e.clone());
        }
        let mut v = e.values().to_vec();
        for (a, d) in action.values().iter().zip(&self.directions) {
            d.expect_dim(v.len())?;
            v.iter_mut().zip(d.values()).for_each(|(x, di)| *x += self.step_size * a * di);
        }
        Embedding::new(v)?.normalized()
    }
}

impl EditAgent for MockAgent {
    fn name(&self) -> &str {
        "mock"
    }

    fn edit(&self, state: &ContentState, action: &ActionVector, space: &ActionSpace) -> Result<ContentState> {
        action.check_space(space)?;
        let e = self.mock_edit(&state.embedding, action)?;
        if e == state.embedding {
            return Ok(state.clone());
        }
        Ok(ContentState::from_embedding(e))
    }
}
