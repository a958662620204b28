use serde::{Deserialize, Serialize};

use super::Embedding;
use crate::{Error, Result};

pub const SCALE_FLOOR: f64 = 1e-8;

/// Per-dimension z-scoring fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

/// A vector that has been passed through a [`Standardizer`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized(Vec<f64>);

impl Standardized {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[cfg(test)]
    pub(crate) fn from_raw(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Standardizer {
    /// Population mean and standard deviation per dimension; the scale is
    /// floored at [`SCALE_FLOOR`] so constant dimensions map to zero.
    pub fn fit<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Embedding>,
    {
        let samples: Vec<&Embedding> = samples.into_iter().collect();
        if samples.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "standardizer needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        let d = samples[0].dim();
        let n = samples.len() as f64;
        let mut mean = vec![0.0; d];
        for s in &samples {
            s.expect_dim(d)?;
            for (m, v) in mean.iter_mut().zip(s.values()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in &samples {
            for ((acc, v), m) in var.iter_mut().zip(s.values()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let scale = var.into_iter().map(|v| (v / n).sqrt().max(SCALE_FLOOR)).collect();
        Ok(Self { mean, scale })
    }

    pub fn from_parts(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if mean.len() != scale.len() {
            return Err(Error::shape("standardizer scale", mean.len(), scale.len()));
        }
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Numeric("standardizer parameters must be finite with positive scale".into()));
        }
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn apply(&self, e: &Embedding) -> Result<Standardized> {
        e.expect_dim(self.dim())?;
        Ok(Standardized(
            e.values()
                .iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .map(|((v, m), s)| (v - m) / s)
                .collect(),
        ))
    }
}
