//! Content and user feature vectors.
//!
//! Providers turn [`Content`] into fixed-dimension [`Embedding`]s. The
//! [`SyntheticEmbedder`] is a pure function of `(seed, content bytes)` and
//! can plant topic structure; [`RemoteEmbedder`] forwards to an HTTP service.
//! Estimator inputs must pass through a fitted [`Standardizer`], which is the
//! only way to obtain a [`Standardized`] vector.

mod cache;
mod remote;
mod standardize;
mod synthetic;

use serde::{Deserialize, Serialize};

pub use cache::{content_hash, CachedProvider};
pub use remote::{RemoteEmbedder, RemoteEmbedderConfig};
pub use standardize::{Standardized, Standardizer, SCALE_FLOOR};
pub use synthetic::SyntheticEmbedder;

use crate::{Error, Result};

/// Default feature dimension of the pretrained text/image encoder family.
pub const DEFAULT_DIM: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("embedding must be non-empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite embedding component {bad}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn normalized(&self) -> Result<Embedding> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroNorm("cannot normalise a zero vector".into()));
        }
        Ok(Embedding(self.0.iter().map(|v| v / n).collect()))
    }

    pub fn expect_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::shape("embedding", dim, self.dim()));
        }
        Ok(())
    }
}

/// Cosine similarity; errors on a zero-norm argument or dimension mismatch.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    b.expect_dim(a.dim())?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm("cosine similarity of a zero vector".into()));
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Element-wise mean of a user's history embeddings (no renormalisation).
pub fn user_feature(history: &[Embedding]) -> Result<Embedding> {
    let first = history
        .first()
        .ok_or_else(|| Error::EmptyHistory("no history items".into()))?;
    let mut acc = vec![0.0; first.dim()];
    for e in history {
        e.expect_dim(first.dim())?;
        for (a, v) in acc.iter_mut().zip(e.values()) {
            *a += v;
        }
    }
    let n = history.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(Embedding(acc))
}

/// A piece of content as seen by embedders and editing agents. Images are
/// referenced by their generation prompt and, when hosted, by URL.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Content {
    Text { text: String },
    Image { prompt: String, url: Option<String> },
}

impl Content {
    pub fn text(s: impl Into<String>) -> Self {
        Content::Text { text: s.into() }
    }

    /// The string a text encoder sees.
    pub fn as_str(&self) -> &str {
        match self {
            Content::Text { text } => text,
            Content::Image { prompt, .. } => prompt,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Content::Text { text } => text.trim().is_empty(),
            Content::Image { prompt, url } => prompt.trim().is_empty() && url.is_none(),
        }
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, content: &Content) -> Result<Embedding>;

    /// Batched embedding; output order matches input order.
    fn embed_many(&self, contents: &[Content]) -> Result<Vec<Embedding>> {
        contents.iter().map(|c| self.embed(c)).collect()
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, content: &Content) -> Result<Embedding> {
        (**self).embed(content)
    }

    fn embed_many(&self, contents: &[Content]) -> Result<Vec<Embedding>> {
        (**self).embed_many(contents)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_item_history_is_that_item() {
        let x = e(&[0.3, -0.2, 0.9]);
        assert_eq!(user_feature(std::slice::from_ref(&x)).unwrap(), x);
    }

    #[test]
    fn opposite_vectors_average_to_zero() {
        let f = user_feature(&[e(&[0.6, 0.8]), e(&[-0.6, -0.8])]).unwrap();
        assert_eq!(f.values(), &[0.0, 0.0]);
    }

    #[test]
    fn axis_vectors_average_to_half() {
        let f = user_feature(&[e(&[1.0, 0.0]), e(&[0.0, 1.0])]).unwrap();
        assert_eq!(f.values(), &[0.5, 0.5]);
    }

    #[test]
    fn empty_history_is_an_explicit_error() {
        assert!(matches!(user_feature(&[]), Err(Error::EmptyHistory(_))));
    }

    #[test]
    fn user_feature_is_permutation_invariant() {
        let h = [e(&[0.1, 0.7]), e(&[0.4, -0.3]), e(&[-0.9, 0.2])];
        let a = user_feature(&h).unwrap();
        let b = user_feature(&[h[2].clone(), h[0].clone(), h[1].clone()]).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn cosine_rejects_zero_vectors() {
        assert!(matches!(cosine(&e(&[0.0, 0.0]), &e(&[1.0, 0.0])), Err(Error::ZeroNorm(_))));
        assert!((cosine(&e(&[1.0, 1.0]), &e(&[2.0, 2.0])).unwrap() - 1.0).abs() < 1e-15);
    }
}
