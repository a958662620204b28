//! Versioned JSON checkpoint records for sequential networks.
//!
//! Floats are written with shortest round-trip formatting and parsed exactly,
//! so save followed by load reproduces every parameter bit for bit.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, Mlp};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub kind: String,
    pub seed: u64,
    pub embedding_dim: usize,
    pub config_hash: String,
    pub created_unix: u64,
}

impl CheckpointHeader {
    pub fn new(kind: &str, seed: u64, embedding_dim: usize, config_hash: &str) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind: kind.to_owned(),
            seed,
            embedding_dim,
            config_hash: config_hash.to_owned(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn check(&self, kind: &str, embedding_dim: Option<usize>) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.kind != kind {
            return Err(Error::Checkpoint(format!("expected a {kind} checkpoint, found {}", self.kind)));
        }
        if let Some(d) = embedding_dim {
            if d != self.embedding_dim {
                return Err(Error::Checkpoint(format!(
                    "checkpoint embedding dim {} does not match configured dim {d}",
                    self.embedding_dim
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub activation: Activation,
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl From<&DenseLayer> for LayerRecord {
    fn from(l: &DenseLayer) -> Self {
        Self {
            activation: l.activation(),
            in_dim: l.in_dim(),
            out_dim: l.out_dim(),
            weights: l.weights().to_vec(),
            bias: l.bias().to_vec(),
        }
    }
}

impl TryFrom<LayerRecord> for DenseLayer {
    type Error = Error;

    fn try_from(r: LayerRecord) -> Result<Self> {
        DenseLayer::from_parts(r.in_dim, r.out_dim, r.activation, r.weights, r.bias)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRecord {
    pub layers: Vec<LayerRecord>,
}

impl From<&Mlp> for MlpRecord {
    fn from(m: &Mlp) -> Self {
        Self {
            layers: m.layers().iter().map(LayerRecord::from).collect(),
        }
    }
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRecord) -> Result<Self> {
        let layers = r
            .layers
            .into_iter()
            .map(DenseLayer::try_from)
            .collect::<Result<Vec<_>>>()?;
        Mlp::new(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(seed in any::<u64>(), hidden in 1usize..6) {
            let mut r = rng::seeded(seed);
            let mlp = Mlp::glorot(&[3, hidden, 2], &[Activation::Tanh, Activation::Sigmoid], &mut r).unwrap();
            let text = serde_json::to_string(&MlpRecord::from(&mlp)).unwrap();
            let back: Mlp = serde_json::from_str::<MlpRecord>(&text).unwrap().try_into().unwrap();
            prop_assert_eq!(&back, &mlp);
            let x = [0.1, -0.4, 0.9];
            prop_assert_eq!(
                back.predict(&x).unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                mlp.predict(&x).unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn header_rejects_mismatched_dim_and_kind() {
        let h = CheckpointHeader::new("estimator", 1, 16, "abc");
        assert!(h.check("estimator", Some(16)).is_ok());
        assert!(h.check("estimator", Some(512)).is_err());
        assert!(h.check("policy", None).is_err());
    }
}
