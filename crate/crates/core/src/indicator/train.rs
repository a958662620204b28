use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{classification_metrics, ClassificationMetrics};
use super::PairwiseEstimator;
use crate::dataset::{FeatureTable, IndexedExample};
use crate::embedding::{Standardized, Standardizer};
use crate::nn::{bce_with_logits, sigmoid, AdamConfig, AdamState, MlpGrads, Tape};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 256,
            learning_rate: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch, accumulated over its mini-batches.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

/// Standardized features plus index triples into them.
#[derive(Debug, Clone)]
pub struct ExampleSet {
    features: Vec<Standardized>,
    examples: Vec<IndexedExample>,
}

impl ExampleSet {
    pub fn new(table: &FeatureTable, standardizer: &Standardizer) -> Result<Self> {
        let features = table
            .features
            .iter()
            .map(|f| standardizer.apply(f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            features,
            examples: table.examples.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.examples.iter().map(|e| e.y as u8).collect()
    }
}

pub fn train_estimator(est: &mut PairwiseEstimator, data: &ExampleSet, cfg: &TrainConfig) -> Result<TrainReport> {
    if cfg.batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be positive".into()));
    }
    if cfg.epochs > 0 && data.is_empty() {
        return Err(Error::InvalidInput("no training examples".into()));
    }
    let sizes: Vec<usize> = est.m1().block_sizes().into_iter().chain(est.m2().block_sizes()).collect();
    let names: Vec<String> = est.m1().block_names("m1.").into_iter().chain(est.m2().block_names("m2.")).collect();
    let mut adam = AdamState::new(AdamConfig::with_learning_rate(cfg.learning_rate), &sizes);
    let mut r = rng::stream(cfg.seed, "indicator-batches");
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut r);
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let loss = train_batch(est, data, batch, &mut adam, &names).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!(
                    "{msg} (epoch {epoch}, batch {b}, learning rate {})",
                    cfg.learning_rate
                )),
                other => other,
            })?;
            total += loss * batch.len() as f64;
        }
        let mean = total / data.len() as f64;
        log::debug!("indicator epoch {epoch}: loss {mean:.6}");
        epoch_losses.push(mean);
    }
    Ok(TrainReport {
        epoch_losses,
        steps: adam.step_count(),
    })
}

fn train_batch(
    est: &mut PairwiseEstimator,
    data: &ExampleSet,
    batch: &[usize],
    adam: &mut AdamState,
    names: &[String],
) -> Result<f64> {
    let k = est.latent_dim();
    // M1 runs once per distinct feature in the batch.
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut proj: Vec<(Vec<f64>, Tape)> = Vec::new();
    let mut slots = Vec::with_capacity(batch.len());
    for &e in batch {
        let ex = data.examples[e];
        let mut ids = [0usize; 3];
        for (n, f) in [ex.i, ex.j, ex.c].into_iter().enumerate() {
            ids[n] = match slot.get(&f) {
                Some(&s) => s,
                None => {
                    proj.push(est.m1().forward(data.features[f].values())?);
                    slot.insert(f, proj.len() - 1);
                    proj.len() - 1
                }
            };
        }
        slots.push(ids);
    }
    let mut logits = Vec::with_capacity(batch.len());
    let mut tapes = Vec::with_capacity(batch.len());
    let mut h = Vec::with_capacity(3 * k);
    for ids in &slots {
        h.clear();
        ids.iter().for_each(|&s| h.extend_from_slice(&proj[s].0));
        let (out, tape) = est.m2().forward(&h)?;
        logits.push(out[0]);
        tapes.push(tape);
    }
    let ys: Vec<f64> = batch.iter().map(|&e| data.examples[e].y).collect();
    let (loss, dz) = bce_with_logits(&logits, &ys)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }

    let mut g1 = MlpGrads::zeros_like(est.m1());
    let mut g2 = MlpGrads::zeros_like(est.m2());
    let mut dproj = vec![vec![0.0; k]; proj.len()];
    for ((ids, tape), g) in slots.iter().zip(&tapes).zip(&dz) {
        let dh = est.m2().backward_accumulate(tape, &[*g], &mut g2)?;
        for (n, &s) in ids.iter().enumerate() {
            dproj[s].iter_mut().zip(&dh[n * k..(n + 1) * k]).for_each(|(a, b)| *a += b);
        }
    }
    for ((_, tape), d) in proj.iter().zip(&dproj) {
        est.m1().backward_accumulate(tape, d, &mut g1)?;
    }

    let grads: Vec<&[f64]> = g1.blocks().into_iter().chain(g2.blocks()).collect();
    let (m1, m2) = est.nets_mut();
    let mut params: Vec<&mut [f64]> = m1.blocks_mut().into_iter().chain(m2.blocks_mut()).collect();
    adam.step(&mut params, &grads, names)?;
    Ok(loss)
}

/// Predicted probabilities for every example, in example order.
pub fn predict_examples(est: &PairwiseEstimator, data: &ExampleSet) -> Result<Vec<f64>> {
    let proj = data
        .features
        .iter()
        .map(|f| est.project(f))
        .collect::<Result<Vec<_>>>()?;
    let mut h = Vec::new();
    data.examples
        .iter()
        .map(|ex| {
            h.clear();
            for f in [ex.i, ex.j, ex.c] {
                h.extend_from_slice(&proj[f]);
            }
            Ok(sigmoid(est.m2().predict(&h)?[0]))
        })
        .collect()
}

pub fn evaluate_examples(est: &PairwiseEstimator, data: &ExampleSet, threshold: f64) -> Result<ClassificationMetrics> {
    classification_metrics(&predict_examples(est, data)?, &data.labels(), threshold)
}
