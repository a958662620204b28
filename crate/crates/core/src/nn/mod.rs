//! Minimal feedforward network substrate: dense layers, sequential MLPs with
//! tape-based backpropagation, Adam and binary cross-entropy. All arithmetic
//! is `f64` and every random draw comes from a caller-supplied seeded stream.

mod activation;
mod adam;
pub mod checkpoint;
mod layer;
mod loss;
mod mlp;

pub use activation::{sigmoid, Activation};
pub use adam::{AdamConfig, AdamState};
pub use layer::{DenseLayer, LayerGrads};
pub use loss::{bce_loss, bce_with_logits, P_EPS};
pub use mlp::{Mlp, MlpGrads, Tape};
