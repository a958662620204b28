//! Dense layer: `y = activation(W x + b)`, weights stored row-major `(out, in)`.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::Activation;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidInput("layer dimensions must be > 0".into()));
        }
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new(-limit, limit).expect("finite positive bound");
        let weights = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Ok(Self {
            in_dim,
            out_dim,
            activation,
            weights,
            bias: vec![0.0; out_dim],
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        Self::from_parts(
            in_dim,
            out_dim,
            activation,
            vec![0.0; in_dim * out_dim],
            vec![0.0; out_dim],
        )
    }

    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidInput("layer dimensions must be > 0".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::shape("layer weights", in_dim * out_dim, weights.len()));
        }
        if bias.len() != out_dim {
            return Err(Error::shape("layer bias", out_dim, bias.len()));
        }
        if !weights.iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(Error::Numeric("layer parameters must be finite".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            activation,
            weights,
            bias,
        })
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.bias)
    }

    /// Weight at row `o` (output unit), column `i` (input unit).
    #[inline]
    pub fn weight(&self, o: usize, i: usize) -> f64 {
        self.weights[o * self.in_dim + i]
    }

    /// Pre-activation `W x + b`. Caller guarantees `x.len() == in_dim`.
    pub(crate) fn preactivate(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim);
        out.clear();
        out.extend(self.weights.chunks_exact(self.in_dim).zip(&self.bias).map(|(row, b)| {
            row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi)
        }));
    }

    /// Partial pre-activation using only input columns `[start, start + x.len())`, no bias.
    pub(crate) fn partial_preactivate(&self, start: usize, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .map(|row| {
                row[start..start + x.len()]
                    .iter()
                    .zip(x)
                    .fold(0.0, |acc, (w, xi)| acc + w * xi)
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::shape("dense layer input", self.in_dim, x.len()));
        }
        let mut z = Vec::with_capacity(self.out_dim);
        self.preactivate(x, &mut z);
        for v in &mut z {
            *v = self.activation.apply(*v);
        }
        Ok(z)
    }

    /// Accumulates `dL/dW += dz x^T`, `dL/db += dz` and returns `W^T dz`.
    pub(crate) fn backward_accumulate(
        &self,
        x: &[f64],
        dz: &[f64],
        grads: &mut LayerGrads,
    ) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for (o, &g) in dz.iter().enumerate() {
            grads.bias[o] += g;
            if g == 0.0 {
                continue;
            }
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut grads.weights[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                dx[i] += row[i] * g;
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }

    pub fn add_assign(&mut self, other: &LayerGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|v| *v *= s);
    }
}
