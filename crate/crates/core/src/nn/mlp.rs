//! Sequential multilayer perceptron with an explicit activation tape.
//!
//! `forward` records every layer input, pre-activation and output; `backward`
//! consumes that tape to produce exact parameter and input gradients. A tape
//! is bound to the network instance and parameter generation that produced
//! it, so replaying it after an optimizer step is reported as a usage error.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::{Activation, DenseLayer, LayerGrads};
use crate::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    id: u64,
    generation: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            id: fresh_id(),
            generation: 0,
        }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

#[derive(Debug, Clone)]
pub struct Tape {
    owner: u64,
    generation: u64,
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp.layers.iter().map(LayerGrads::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.layers.iter_mut().for_each(|l| l.scale(s));
    }

    /// Gradient blocks in the same order as [`Mlp::blocks_mut`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn all(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("an MLP needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(
                    format!("layer {} input (chained from layer {k})", k + 1),
                    pair[0].out_dim(),
                    pair[1].in_dim(),
                ));
            }
        }
        Ok(Self {
            layers,
            id: fresh_id(),
            generation: 0,
        })
    }

    /// Glorot-initialised network with `dims = [in, h1, ..., out]`.
    pub fn glorot<R: Rng + ?Sized>(
        dims: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::InvalidInput(format!(
                "need one activation per layer: {} dims, {} activations",
                dims.len(),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| DenseLayer::glorot(w[0], w[1], act, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights().len() + l.bias().len())
            .sum()
    }

    /// Parameter blocks `[w0, b0, w1, b1, ...]`. Invalidates outstanding tapes.
    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.generation += 1;
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            let (w, b) = l.params_mut();
            out.push(w);
            out.push(b);
        }
        out
    }

    pub fn block_names(&self, prefix: &str) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|k| [format!("{prefix}layer{k}.weights"), format!("{prefix}layer{k}.bias")])
            .collect()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights().len(), l.bias().len()])
            .collect()
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        if input.len() != self.in_dim() {
            return Err(Error::shape("mlp input", self.in_dim(), input.len()));
        }
        let n = self.layers.len();
        let mut tape = Tape {
            owner: self.id,
            generation: self.generation,
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
        };
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut z = Vec::with_capacity(layer.out_dim());
            layer.preactivate(&x, &mut z);
            let y: Vec<f64> = z.iter().map(|&v| layer.activation().apply(v)).collect();
            tape.inputs.push(std::mem::replace(&mut x, y.clone()));
            tape.pre.push(z);
            tape.outputs.push(y);
        }
        Ok((x, tape))
    }

    /// Inference without recording a tape.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim() {
            return Err(Error::shape("mlp input", self.in_dim(), input.len()));
        }
        let mut x = input.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers {
            layer.preactivate(&x, &mut z);
            x.clear();
            x.extend(z.iter().map(|&v| layer.activation().apply(v)));
        }
        Ok(x)
    }

    /// Completes a forward pass given the first layer's pre-activation.
    pub(crate) fn predict_from_first_preactivation(&self, z0: &[f64]) -> Vec<f64> {
        let first = &self.layers[0];
        let mut x: Vec<f64> = z0.iter().map(|&v| first.activation().apply(v)).collect();
        let mut z = Vec::new();
        for layer in &self.layers[1..] {
            layer.preactivate(&x, &mut z);
            x.clear();
            x.extend(z.iter().map(|&v| layer.activation().apply(v)));
        }
        x
    }

    pub fn backward(&self, tape: &Tape, output_gradient: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let mut grads = MlpGrads::zeros_like(self);
        let dx = self.backward_accumulate(tape, output_gradient, &mut grads)?;
        Ok((grads, dx))
    }

    /// Adds this tape's parameter gradients into `grads`; returns the input gradient.
    pub fn backward_accumulate(
        &self,
        tape: &Tape,
        output_gradient: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<Vec<f64>> {
        if tape.owner != self.id || tape.generation != self.generation {
            return Err(Error::Usage(
                "activation tape does not belong to the current network parameters".into(),
            ));
        }
        if output_gradient.len() != self.out_dim() {
            return Err(Error::shape("output gradient", self.out_dim(), output_gradient.len()));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::shape("gradient buffer layers", self.layers.len(), grads.layers.len()));
        }
        let mut dy = output_gradient.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let dz: Vec<f64> = dy
                .iter()
                .zip(&tape.pre[k])
                .zip(&tape.outputs[k])
                .map(|((g, &z), &y)| g * layer.activation().derivative(z, y))
                .collect();
            dy = layer.backward_accumulate(&tape.inputs[k], &dz, &mut grads.layers[k]);
        }
        Ok(dy)
    }
}
